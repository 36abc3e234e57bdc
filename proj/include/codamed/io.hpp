#pragma once

#include <string>
#include <vector>

#include "codamed/coda.hpp"
#include "codamed/mediation.hpp"

namespace codamed::io {

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

/// SBP CSV layout: header row holds the balance (coordinate) labels after a
/// leading cell for the part column; each data row is a part label followed
/// by its -1/0/1 entries.
struct SbpFile {
  coda::SbpMatrix sbp;
  std::vector<std::string> balance_labels;
};

SbpFile parse_sbp_csv(const std::string& text);
SbpFile read_sbp_csv(const std::string& path);
std::string sbp_csv(const coda::SbpMatrix& sbp, std::vector<std::string> balance_labels = {});

/// Counts CSV: first column sample id, remaining columns one taxon each.
/// Metadata CSV: first column sample id, plus `exposure` (0/1), `response`,
/// and any further columns, which are treated as categorical confounders.
/// Rows are joined on sample id; the stratum label is the ';'-join of the
/// confounder values in column order. When `part_order` is given the count
/// columns are rearranged to match it.
med::CohortData read_cohort(const std::string& counts_path, const std::string& meta_path,
                            const std::vector<std::string>& part_order = {});

/// Inverse of read_cohort for simulated data: writes <counts_path> and a
/// metadata file with confounder columns split from the stratum labels.
void write_cohort(const med::CohortData& data, const std::vector<std::string>& part_labels,
                  const std::string& counts_path, const std::string& meta_path);

/// Derived metadata path for a counts path: "x.csv" -> "x.meta.csv".
std::string meta_path_for(const std::string& counts_path);

/// ilr coordinate table for a counts file.
std::string ilr_table_csv(const std::string& counts_text, const SbpFile& sbp_file,
                          double zero_replacement);

/// Effects table: one row per effect (te, nde, oie, cie_k) with point, se and
/// confidence bounds; cie rows also carry the pooled path coefficients.
std::string effects_csv(const med::MediationEstimate& estimate);
std::string effects_json(const med::MediationEstimate& estimate);

}  // namespace codamed::io
