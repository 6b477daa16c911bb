#pragma once

namespace mctopo {

/// Selects the OpenMP kernel or its serial reference.
enum class Execution { Serial, Parallel };

}  // namespace mctopo
