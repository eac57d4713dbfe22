#pragma once

#include <atomic>
#include <cstdint>
#include <string>
#include <vector>

namespace eqlab {

// Process-wide counters of silent degradations. Counts depend only on the
// inputs, never on thread scheduling; the runner resets them per task and
// turns nonzero counts into report warnings.
enum class Warning : int {
  torus_cutoff,        // no lift of norm <= 1/2: distance reported as 1
  zq_cutoff,           // same inside d~(., Z_Q)
  phi_capped,          // phi_Q evaluated at its cap
  grid_coarsening,     // convolution accumulated on the snap grid
  montecarlo_fallback, // exact law over budget, sampled instead
  candidate_stride,    // granulation candidates thinned to the cap
  count_
};

const char* warning_name(Warning w);
void note(Warning w, std::uint64_t times = 1);
std::uint64_t warning_count(Warning w);
void reset_warnings();

struct WarningEntry {
  std::string name;
  std::uint64_t count = 0;
};
// Nonzero counters in enum order.
std::vector<WarningEntry> collect_warnings();

}  // namespace eqlab
