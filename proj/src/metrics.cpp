#include "mtaa/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

namespace mtaa {

double pcc(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw InvalidInput("pcc: length mismatch");
  if (a.size() < 2) throw InvalidInput("pcc: need at least two samples");
  const double ma = a.mean(), mb = b.mean();
  const Vec da = a.array() - ma;
  const Vec db = b.array() - mb;
  const double va = da.squaredNorm(), vb = db.squaredNorm();
  if (va <= 0.0 || vb <= 0.0) throw DegenerateInput("pcc: constant input vector");
  return da.dot(db) / std::sqrt(va * vb);
}

Vec average_ranks(const Vec& v) {
  const int n = static_cast<int>(v.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int i, int j) { return v[i] < v[j]; });
  Vec ranks(n);
  int i = 0;
  while (i < n) {
    int j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = (i + j) / 2.0 + 1.0;  // 1-based
    for (int k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

double scc(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw InvalidInput("scc: length mismatch");
  if (a.size() < 2) throw InvalidInput("scc: need at least two samples");
  return pcc(average_ranks(a), average_ranks(b));
}

double rmse(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw InvalidInput("rmse: length mismatch");
  if (a.size() == 0) throw InvalidInput("rmse: empty input");
  return std::sqrt((a - b).squaredNorm() / a.size());
}

EvalReport evaluate(const std::vector<SampleRecord>& predictions,
                    const std::vector<SampleRecord>& truth) {
  if (predictions.size() != truth.size()) {
    throw InvalidInput("evaluate: prediction and truth counts differ");
  }
  std::map<std::string, const SampleRecord*> by_id;
  for (const SampleRecord& t : truth) by_id[t.id] = &t;
  if (by_id.size() != truth.size()) throw InvalidInput("evaluate: duplicate ids in truth");

  const int n = static_cast<int>(predictions.size());
  EvalReport report;
  report.n = n;
  for (int d = 0; d < 4; ++d) {
    Vec pred_scores(n), true_scores(n);
    for (int i = 0; i < n; ++i) {
      const SampleRecord& p = predictions[i];
      const auto it = by_id.find(p.id);
      if (it == by_id.end()) throw InvalidInput("evaluate: no ground truth for id '" + p.id + "'");
      if (p.targets.size() != 4 || it->second->targets.size() != 4) {
        throw InvalidInput("evaluate: records must carry all four dimensions");
      }
      pred_scores[i] = mean_score(p.targets[d]);
      true_scores[i] = mean_score(it->second->targets[d]);
    }
    report.dims[d].pcc = pcc(pred_scores, true_scores);
    report.dims[d].scc = scc(pred_scores, true_scores);
    report.dims[d].rmse = rmse(pred_scores, true_scores);
  }
  return report;
}

namespace {

std::string fmt_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

std::string format_eval_table(const EvalReport& report) {
  std::ostringstream os;
  os << "measure";
  for (const char* name : kDimensionNames) os << "," << name;
  os << "\n";
  const auto row = [&](const char* name, auto get) {
    os << name;
    for (int d = 0; d < 4; ++d) os << "," << fmt_double(get(report.dims[d]));
    os << "\n";
  };
  row("pcc", [](const EvalReport::Entry& e) { return e.pcc; });
  row("scc", [](const EvalReport::Entry& e) { return e.scc; });
  row("rmse", [](const EvalReport::Entry& e) { return e.rmse; });
  os << "n," << report.n << "," << report.n << "," << report.n << "," << report.n << "\n";
  return os.str();
}

EvalReport parse_eval_table(const std::string& table) {
  std::istringstream is(table);
  std::string line;
  EvalReport report;
  long line_no = 0;
  bool saw_header = false, saw_pcc = false, saw_scc = false, saw_rmse = false, saw_n = false;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (fields.size() != 5) throw ParseError("eval table row needs 5 columns", line_no);
    if (fields[0] == "measure") {
      saw_header = true;
      continue;
    }
    for (int d = 0; d < 4; ++d) {
      double v;
      auto [ptr, ec] = std::from_chars(fields[d + 1].data(),
                                       fields[d + 1].data() + fields[d + 1].size(), v);
      if (ec != std::errc()) throw ParseError("bad number in eval table", line_no);
      if (fields[0] == "pcc") report.dims[d].pcc = v;
      else if (fields[0] == "scc") report.dims[d].scc = v;
      else if (fields[0] == "rmse") report.dims[d].rmse = v;
      else if (fields[0] == "n") report.n = static_cast<int>(v);
      else throw ParseError("unknown eval table measure '" + fields[0] + "'", line_no);
    }
    if (fields[0] == "pcc") saw_pcc = true;
    if (fields[0] == "scc") saw_scc = true;
    if (fields[0] == "rmse") saw_rmse = true;
    if (fields[0] == "n") saw_n = true;
  }
  if (!saw_header || !saw_pcc || !saw_scc || !saw_rmse || !saw_n) {
    throw ParseError("eval table is missing rows", 0);
  }
  return report;
}

}  // namespace mtaa
