#pragma once

namespace gpusentinel {

// Selects the OpenMP kernel or its serial reference. Both produce identical
// results; the serial path exists for tests and benchmarks.
enum class Exec { serial, parallel };

}  // namespace gpusentinel
