#include "blhybrid/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "blhybrid/error.hpp"
#include "blhybrid/io.hpp"

namespace blhybrid::config {

namespace {

Error invalid(const std::string& field, const std::string& why) {
  return Error(Errc::ConfigInvalid, field + ": " + why);
}

// Drops a trailing comment that is not inside a string.
std::string_view strip_comment(std::string_view line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '\\' && quoted) {
      ++i;
    } else if (line[i] == '"') {
      quoted = !quoted;
    } else if (line[i] == '#' && !quoted) {
      return line.substr(0, i);
    }
  }
  return line;
}

bool bare_key(std::string_view k) {
  return !k.empty() && std::all_of(k.begin(), k.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
  });
}

class ValueParser {
 public:
  ValueParser(std::string_view text, const std::string& field) : s_(text), field_(field) {}

  Value parse() {
    Value v = value();
    skip_ws();
    if (pos_ != s_.size()) throw invalid(field_, "trailing characters");
    return v;
  }

 private:
  void skip_ws() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }

  Value value() {
    skip_ws();
    if (pos_ >= s_.size()) throw invalid(field_, "missing value");
    const char c = s_[pos_];
    if (c == '"') return {string()};
    if (c == '[') return {array()};
    return scalar();
  }

  std::string string() {
    std::string out;
    ++pos_;
    while (pos_ < s_.size() && s_[pos_] != '"') {
      char c = s_[pos_++];
      if (c == '\\') {
        if (pos_ >= s_.size()) break;
        const char e = s_[pos_++];
        switch (e) {
          case 'n': c = '\n'; break;
          case 't': c = '\t'; break;
          case '"': c = '"'; break;
          case '\\': c = '\\'; break;
          default: throw invalid(field_, "unsupported escape");
        }
      }
      out.push_back(c);
    }
    if (pos_ >= s_.size()) throw invalid(field_, "unterminated string");
    ++pos_;
    return out;
  }

  Array array() {
    Array out;
    ++pos_;
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == ']') {
      ++pos_;
      return out;
    }
    while (true) {
      Value v = value();
      if (std::holds_alternative<Array>(v.v)) throw invalid(field_, "nested arrays");
      out.push_back(std::move(v));
      skip_ws();
      if (pos_ >= s_.size()) throw invalid(field_, "unterminated array");
      if (s_[pos_] == ']') {
        ++pos_;
        return out;
      }
      if (s_[pos_] != ',') throw invalid(field_, "expected ',' in array");
      ++pos_;
      skip_ws();
      if (pos_ < s_.size() && s_[pos_] == ']') {
        ++pos_;
        return out;
      }
    }
  }

  Value scalar() {
    std::size_t end = pos_;
    while (end < s_.size() && s_[end] != ',' && s_[end] != ']' && s_[end] != ' ' &&
           s_[end] != '\t')
      ++end;
    std::string token(s_.substr(pos_, end - pos_));
    pos_ = end;
    if (token == "true") return {true};
    if (token == "false") return {false};
    std::erase(token, '_');
    const bool is_float = token.find_first_of(".eE") != std::string::npos ||
                          token == "inf" || token == "nan";
    if (!is_float) {
      std::int64_t i = 0;
      const char* first = token.data() + (token.starts_with('+') ? 1 : 0);
      auto [p, ec] = std::from_chars(first, token.data() + token.size(), i);
      if (ec == std::errc() && p == token.data() + token.size()) return {i};
    } else if (auto d = io::parse_double(token)) {
      return {*d};
    }
    throw invalid(field_, "cannot parse value '" + token + "'");
  }

  std::string_view s_;
  const std::string& field_;
  std::size_t pos_ = 0;
};

// Typed readers. Each throws ConfigInvalid naming the field on a type error.
struct Reader {
  const Table& table;
  std::vector<std::string> used;

  const Value* find(const std::string& key) {
    auto it = table.find(key);
    if (it == table.end()) return nullptr;
    used.push_back(key);
    return &it->second;
  }

  static double as_double(const Value& v, const std::string& key) {
    if (auto d = std::get_if<double>(&v.v)) return *d;
    if (auto i = std::get_if<std::int64_t>(&v.v)) return static_cast<double>(*i);
    throw invalid(key, "expected a number");
  }

  static std::int64_t as_int(const Value& v, const std::string& key) {
    if (auto i = std::get_if<std::int64_t>(&v.v)) return *i;
    throw invalid(key, "expected an integer");
  }

  void number(const std::string& key, double& out) {
    if (auto v = find(key)) {
      out = as_double(*v, key);
      if (!std::isfinite(out)) throw invalid(key, "must be finite");
    }
  }

  template <class T>
  void count(const std::string& key, T& out, bool allow_zero = false) {
    if (auto v = find(key)) {
      const auto i = as_int(*v, key);
      if (i < 0 || (!allow_zero && i == 0)) throw invalid(key, "must be positive");
      out = static_cast<T>(i);
    }
  }

  void flag(const std::string& key, bool& out) {
    if (auto v = find(key)) {
      if (auto b = std::get_if<bool>(&v->v)) {
        out = *b;
        return;
      }
      throw invalid(key, "expected true or false");
    }
  }

  void text(const std::string& key, std::string& out) {
    if (auto v = find(key)) {
      if (auto s = std::get_if<std::string>(&v->v)) {
        out = *s;
        return;
      }
      throw invalid(key, "expected a string");
    }
  }

  void path(const std::string& key, std::filesystem::path& out, const std::filesystem::path& base) {
    std::string s;
    if (!find(key)) return;
    used.pop_back();
    text(key, s);
    if (s.empty()) throw invalid(key, "empty path");
    out = std::filesystem::path(s).is_absolute() ? std::filesystem::path(s) : base / s;
  }

  void counts(const std::string& key, std::vector<std::size_t>& out) {
    if (auto v = find(key)) {
      auto arr = std::get_if<Array>(&v->v);
      if (!arr) throw invalid(key, "expected an array");
      std::vector<std::size_t> tmp;
      for (const auto& e : *arr) {
        const auto i = as_int(e, key);
        if (i <= 0) throw invalid(key, "entries must be positive");
        tmp.push_back(static_cast<std::size_t>(i));
      }
      out = std::move(tmp);
    }
  }

  void strings(const std::string& key, std::vector<std::string>& out) {
    if (auto v = find(key)) {
      auto arr = std::get_if<Array>(&v->v);
      if (!arr) throw invalid(key, "expected an array");
      std::vector<std::string> tmp;
      for (const auto& e : *arr) {
        auto s = std::get_if<std::string>(&e.v);
        if (!s || s->empty()) throw invalid(key, "entries must be nonempty strings");
        tmp.push_back(*s);
      }
      out = std::move(tmp);
    }
  }
};

}  // namespace

Table parse_toml(std::string_view text) {
  Table out;
  std::string section;
  std::size_t lineno = 0;
  for (auto raw : io::split_lines(text)) {
    ++lineno;
    const auto line = io::trim(strip_comment(raw));
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(lineno);
    if (line.front() == '[') {
      if (line.back() != ']') throw invalid(where, "malformed section header");
      const auto name = io::trim(line.substr(1, line.size() - 2));
      if (!bare_key(name)) throw invalid(where, "bad section name");
      section = std::string(name);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw invalid(where, "expected key = value");
    const auto key = io::trim(line.substr(0, eq));
    if (!bare_key(key)) throw invalid(where, "bad key");
    const std::string field = section.empty() ? std::string(key) : section + "." + std::string(key);
    if (out.count(field)) throw invalid(field, "duplicate key");
    out[field] = ValueParser(io::trim(line.substr(eq + 1)), field).parse();
  }
  return out;
}

RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
  const Table table = parse_toml(text);
  Reader r{table, {}};
  RunConfig cfg;
  auto& p = cfg.pipeline;
  auto& t = p.tcn;

  r.path("data_dir", cfg.data_dir, base_dir);
  r.strings("tickers", cfg.tickers);
  cfg.output_dir = base_dir / cfg.output_dir;
  r.path("output_dir", cfg.output_dir, base_dir);
  std::string caps;
  r.text("market_caps", caps);
  if (!caps.empty()) cfg.market_caps = caps;
  std::int64_t seed = 0;
  if (auto v = r.find("seed")) {
    seed = Reader::as_int(*v, "seed");
    if (seed < 0) throw invalid("seed", "must be nonnegative");
  }
  cfg.seed = static_cast<std::uint64_t>(seed);
  r.count("workers", cfg.workers);

  r.flag("ssa.enabled", p.use_ssa);
  r.count("ssa.window", p.ssa_window, true);
  r.number("ssa.energy_keep", p.ssa_energy);
  r.count("emd.omega", p.omega);
  r.number("split.train", p.split.train_frac);
  r.number("split.val", p.split.val_frac);
  r.number("split.test", p.split.test_frac);

  r.count("tcn.kernel_size", t.kernel_size);
  r.counts("tcn.hidden_sizes", t.hidden_sizes);
  r.number("tcn.dropout", t.dropout);
  r.number("tcn.learning_rate", t.learning_rate);
  r.count("tcn.epochs", t.epochs);
  r.count("tcn.batch_size", t.batch_size);
  r.count("tcn.window", t.window);
  r.flag("tcn.last_value_skip", t.last_value_skip);
  t.seed = cfg.seed;

  r.number("bl.lambda", cfg.bl.lambda);
  r.number("bl.tau", cfg.bl.tau);
  r.number("bl.rf_daily", cfg.bl.rf_daily);
  r.count("bl.lookback_days", cfg.bl.lookback_days);
  r.counts("backtest.holding_periods", cfg.backtest.holding_periods);
  r.number("backtest.cost_rate", cfg.backtest.cost_rate);

  for (const auto& [key, value] : table)
    if (std::find(r.used.begin(), r.used.end(), key) == r.used.end())
      throw invalid(key, "unknown key");
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const Error&) {
    throw invalid("config", "cannot read " + path.string());
  }
  return parse_config(text, path.parent_path().empty() ? "." : path.parent_path());
}

void validate(const RunConfig& cfg) {
  if (cfg.data_dir.empty()) throw invalid("data_dir", "required");
  if (!std::filesystem::is_directory(cfg.data_dir))
    throw invalid("data_dir", cfg.data_dir.string() + " is not a directory");
  if (cfg.backtest.holding_periods.empty())
    throw invalid("backtest.holding_periods", "must be nonempty");
  if (!(cfg.backtest.cost_rate >= 0.0)) throw invalid("backtest.cost_rate", "must be >= 0");
  const auto& p = cfg.pipeline;
  if (!(p.ssa_energy > 0.0 && p.ssa_energy <= 1.0))
    throw invalid("ssa.energy_keep", "must be in (0, 1]");
  if (!(cfg.bl.lambda > 0.0)) throw invalid("bl.lambda", "must be positive");
  if (!(cfg.bl.tau > 0.0)) throw invalid("bl.tau", "must be positive");
  const auto& s = p.split;
  if (!(s.train_frac > 0 && s.val_frac > 0 && s.test_frac > 0) ||
      std::abs(s.train_frac + s.val_frac + s.test_frac - 1.0) > 1e-12)
    throw invalid("split", "fractions must be positive and sum to 1");
  try {
    p.tcn.validate();
  } catch (const Error& e) {
    throw invalid("tcn", e.detail());
  }
}

std::vector<std::string> resolve_tickers(const RunConfig& cfg) {
  if (!cfg.tickers.empty()) return cfg.tickers;
  std::vector<std::string> out;
  const auto caps = cfg.market_caps.filename();
  for (const auto& entry : std::filesystem::directory_iterator(cfg.data_dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".csv") continue;
    if (entry.path().filename() == caps) continue;
    out.push_back(entry.path().stem().string());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw Error(Errc::EmptyFile, "no OHLCV files in " + cfg.data_dir.string());
  return out;
}

}  // namespace blhybrid::config
