#pragma once

namespace blhybrid {

/// Selects between the OpenMP kernel and its serial reference.
/// Both produce bitwise-identical results; the serial path exists for testing
/// and benchmarking.
enum class Exec { Serial, Parallel };

}  // namespace blhybrid
