#pragma once

namespace satweight {

/// Selects the OpenMP kernel or its single-threaded reference loop.
enum class Execution { serial, parallel };

/// Sets the OpenMP worker count (no-op when built without OpenMP).
void set_thread_count(int threads);
int thread_count();

}  // namespace satweight
