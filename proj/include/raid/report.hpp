#pragma once

#include <string>
#include <vector>

namespace raid::report {

// One method's metrics for the comparison table. Either half may be absent
// (a run that only attacked, or only ranked).
struct MethodRow {
  std::string method;
  bool has_attack = false;
  double f1_micro = 0.0;
  double bacc = 0.0;
  bool has_rec = false;
  std::vector<int> cutoffs;
  std::vector<double> hr;    // parallel to cutoffs
  std::vector<double> ndcg;  // parallel to cutoffs
};

// Builds a row from serialized reports. Pass an empty string for a report
// that does not exist; at least one must be present.
MethodRow parse_run(const std::string& method, const std::string& attack_json,
                    const std::string& rec_json);

struct CombinedTable {
  std::vector<MethodRow> rows;  // sorted by method name
  std::vector<int> cutoffs;     // union across rows, ascending

  // method,f1_micro,bacc,hr@K...,ndcg@K...; absent metrics are empty cells.
  std::string to_csv() const;
  // The same table as a pipe-delimited Markdown table.
  std::string to_markdown() const;
};

// Sorts rows by method name and collects the cutoff union. Duplicate method
// names or rows with mismatched hr/ndcg lengths are rejected.
CombinedTable combine(std::vector<MethodRow> rows);

}  // namespace raid::report
