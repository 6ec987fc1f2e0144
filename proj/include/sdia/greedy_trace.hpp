#pragma once

#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "sdia/linalg.hpp"

namespace sdia {

namespace detail {

inline std::string csv_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

// One candidate evaluation inside an epoch. `score` is the exact cost
// increment the candidate would contribute; NaN marks a candidate with no
// improving move.
struct CandidateScore {
  int index = -1;
  double score = 0.0;
};

struct GreedyEpoch {
  int epoch = 0;          // 1-based
  int selected_index = -1;
  double v_star = 0.0;    // diagonal increment at the selected sensor
  Vector s;               // coupling vector (correlated only; empty otherwise)
  double J_after = 0.0;
  int solver_iters = 0;   // 0 for closed-form epochs
  bool warning = false;   // inner solver hit its iteration cap
  std::vector<CandidateScore> scores;
};

// Full audit trail of one greedy construction. The epochs are sufficient to
// reconstruct the plan prefix at any k (selection order, diagonal increments,
// coupling vectors).
struct GreedyTrace {
  double J_start = 0.0;
  std::vector<GreedyEpoch> epochs;
  bool shortfall = false;  // stopped before reaching k improving sensors
};

// epoch,selected_index,v_star,J_after,n_candidates,shortfall_flag
// shortfall_flag marks the whole run and repeats on every row.
inline void write_independent_trace_csv(const GreedyTrace& trace,
                                        std::ostream& os) {
  os << "epoch,selected_index,v_star,J_after,n_candidates,shortfall_flag\n";
  for (const auto& e : trace.epochs) {
    os << e.epoch << ',' << e.selected_index << ','
       << detail::csv_double(e.v_star) << ',' << detail::csv_double(e.J_after)
       << ',' << e.scores.size() << ',' << (trace.shortfall ? 1 : 0) << '\n';
  }
}

// epoch,selected_index,s_norm,J_after,solver_iters,warning_flag
inline void write_correlated_trace_csv(const GreedyTrace& trace,
                                       std::ostream& os) {
  os << "epoch,selected_index,s_norm,J_after,solver_iters,warning_flag\n";
  for (const auto& e : trace.epochs) {
    const double s_norm = e.s.size() > 0 ? e.s.norm() : 0.0;
    os << e.epoch << ',' << e.selected_index << ','
       << detail::csv_double(s_norm) << ',' << detail::csv_double(e.J_after)
       << ',' << e.solver_iters << ',' << (e.warning ? 1 : 0) << '\n';
  }
}

}  // namespace sdia
