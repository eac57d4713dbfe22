#include "eqlab/diagnostics.hpp"

#include <array>

namespace eqlab {
namespace {

constexpr std::size_t kCount = static_cast<std::size_t>(Warning::count_);
std::array<std::atomic<std::uint64_t>, kCount> counters{};

}  // namespace

const char* warning_name(Warning w) {
  switch (w) {
    case Warning::torus_cutoff: return "torus_cutoff";
    case Warning::zq_cutoff: return "zq_cutoff";
    case Warning::phi_capped: return "phi_capped";
    case Warning::grid_coarsening: return "grid_coarsening";
    case Warning::montecarlo_fallback: return "montecarlo_fallback";
    case Warning::candidate_stride: return "candidate_stride";
    case Warning::count_: break;
  }
  return "unknown";
}

void note(Warning w, std::uint64_t times) {
  counters[static_cast<std::size_t>(w)].fetch_add(times, std::memory_order_relaxed);
}

std::uint64_t warning_count(Warning w) { return counters[static_cast<std::size_t>(w)].load(); }

void reset_warnings() {
  for (auto& c : counters) c.store(0);
}

std::vector<WarningEntry> collect_warnings() {
  std::vector<WarningEntry> out;
  for (std::size_t i = 0; i < kCount; ++i) {
    const auto c = counters[i].load();
    if (c > 0) out.push_back({warning_name(static_cast<Warning>(i)), c});
  }
  return out;
}

}  // namespace eqlab
