#pragma once

#include "mtaa/data.hpp"

#include <array>
#include <string>
#include <vector>

namespace mtaa {

/// Sample Pearson correlation. Throws DegenerateInput when either vector is
/// constant (the statistic is undefined there, never silently 0).
double pcc(const Vec& a, const Vec& b);

/// Spearman rank correlation: Pearson correlation of the ranks, ties
/// receiving average fractional ranks.
double scc(const Vec& a, const Vec& b);

double rmse(const Vec& a, const Vec& b);

/// Average (fractional) ranks, 1-based.
Vec average_ranks(const Vec& v);

/// The evaluation triple per dimension.
struct EvalReport {
  struct Entry {
    double pcc = 0.0;
    double scc = 0.0;
    double rmse = 0.0;
  };
  std::array<Entry, 4> dims;  // canonical dimension order
  int n = 0;
};

/// Scalarizes both sides with mean_score and computes the triple per
/// dimension. Prediction and truth sets are matched by id and must carry the
/// same ids.
EvalReport evaluate(const std::vector<SampleRecord>& predictions,
                    const std::vector<SampleRecord>& truth);

/// Delimited table, rows = measure, columns = dimensions. Parses back
/// losslessly.
std::string format_eval_table(const EvalReport& report);
EvalReport parse_eval_table(const std::string& table);

}  // namespace mtaa
