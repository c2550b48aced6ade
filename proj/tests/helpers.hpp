#pragma once

#include <cstdint>
#include <vector>

#include "srtlab/lattice_laws.hpp"

namespace testing {

inline srt::LatticeLaw table_law(std::vector<double> pmf, std::int64_t xmin = 1,
                                 std::int64_t xmax = 64) {
  srt::TailSpec spec;
  spec.family = srt::TailFamily::custom_table;
  spec.alpha = 0.5;
  spec.table = std::move(pmf);
  spec.table_xmin = xmin;
  return srt::build_law(spec, xmax);
}

inline srt::TailSpec power_spec(double alpha) {
  srt::TailSpec spec;
  spec.family = srt::TailFamily::pure_power;
  spec.alpha = alpha;
  return spec;
}

}  // namespace testing
