#include "codamed/io.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

#include "codamed/csv.hpp"

namespace codamed::io {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::int64_t parse_count(const std::string& s, const std::string& where) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(errc::io_error, "expected an integer count in " + where + ", got '" + s + "'");
  }
}

double parse_real(const std::string& s, const std::string& where) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(errc::io_error, "expected a number in " + where + ", got '" + s + "'");
  }
}

}  // namespace

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(errc::io_error, "cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(errc::io_error, "cannot write '" + path + "'");
  out << content;
  if (!out) throw Error(errc::io_error, "short write to '" + path + "'");
}

SbpFile parse_sbp_csv(const std::string& text) {
  auto rows = csv::parse(text);
  if (rows.size() < 3) throw Error(errc::io_error, "SBP CSV needs a header and >= 2 part rows");
  const std::size_t width = rows[0].size();
  if (width < 2) throw Error(errc::io_error, "SBP CSV needs balance columns");
  SbpFile out;
  out.balance_labels.assign(rows[0].begin() + 1, rows[0].end());
  const Eigen::Index parts = static_cast<Eigen::Index>(rows.size() - 1);
  const Eigen::Index balances = static_cast<Eigen::Index>(width - 1);
  Eigen::MatrixXi m(parts, balances);
  std::vector<std::string> labels;
  for (Eigen::Index j = 0; j < parts; ++j) {
    const auto& row = rows[static_cast<std::size_t>(j + 1)];
    if (row.size() != width)
      throw Error(errc::io_error, "SBP CSV row " + std::to_string(j + 2) + " has " +
                                      std::to_string(row.size()) + " fields, expected " +
                                      std::to_string(width));
    labels.push_back(row[0]);
    for (Eigen::Index k = 0; k < balances; ++k) {
      const std::string& cell = row[static_cast<std::size_t>(k + 1)];
      if (cell == "1" || cell == "+1")
        m(j, k) = 1;
      else if (cell == "-1")
        m(j, k) = -1;
      else if (cell == "0")
        m(j, k) = 0;
      else
        throw Error(errc::io_error, "SBP cell must be -1, 0 or 1, got '" + cell + "'");
    }
  }
  out.sbp = coda::validate_sbp(m, labels);
  return out;
}

SbpFile read_sbp_csv(const std::string& path) { return parse_sbp_csv(read_text_file(path)); }

std::string sbp_csv(const coda::SbpMatrix& sbp, std::vector<std::string> balance_labels) {
  if (balance_labels.empty())
    for (Eigen::Index k = 0; k < sbp.balances(); ++k)
      balance_labels.push_back("b" + std::to_string(k + 1));
  if (static_cast<Eigen::Index>(balance_labels.size()) != sbp.balances())
    throw Error(errc::dimension_mismatch, "one balance label per column required");
  std::vector<std::string> header{"part"};
  header.insert(header.end(), balance_labels.begin(), balance_labels.end());
  std::string out = csv::join_row(header);
  for (Eigen::Index j = 0; j < sbp.parts(); ++j) {
    std::vector<std::string> row{sbp.part_labels[static_cast<std::size_t>(j)]};
    for (Eigen::Index k = 0; k < sbp.balances(); ++k)
      row.push_back(std::to_string(sbp.entries(j, k)));
    out += csv::join_row(row);
  }
  return out;
}

namespace {

struct CountsTable {
  std::vector<std::string> sample_ids;
  std::vector<std::string> taxa;
  med::CountMatrix counts;
};

CountsTable parse_counts_csv(const std::string& text, const std::vector<std::string>& part_order) {
  auto rows = csv::parse(text);
  if (rows.size() < 2) throw Error(errc::io_error, "counts CSV needs a header and data rows");
  const std::size_t width = rows[0].size();
  if (width < 2) throw Error(errc::io_error, "counts CSV needs taxon columns");
  CountsTable table;
  table.taxa.assign(rows[0].begin() + 1, rows[0].end());

  std::vector<std::size_t> source_col;
  if (part_order.empty()) {
    for (std::size_t k = 0; k < table.taxa.size(); ++k) source_col.push_back(k);
  } else {
    for (const auto& want : part_order) {
      auto it = std::find(table.taxa.begin(), table.taxa.end(), want);
      if (it == table.taxa.end())
        throw Error(errc::io_error, "counts CSV lacks a column for part '" + want + "'");
      source_col.push_back(static_cast<std::size_t>(it - table.taxa.begin()));
    }
    table.taxa = part_order;
  }

  const Eigen::Index n = static_cast<Eigen::Index>(rows.size() - 1);
  table.counts.resize(n, static_cast<Eigen::Index>(source_col.size()));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i + 1)];
    if (row.size() != width)
      throw Error(errc::io_error, "counts CSV row " + std::to_string(i + 2) + " is ragged");
    table.sample_ids.push_back(row[0]);
    for (std::size_t k = 0; k < source_col.size(); ++k)
      table.counts(i, static_cast<Eigen::Index>(k)) =
          parse_count(row[source_col[k] + 1], "counts row " + std::to_string(i + 2));
  }
  return table;
}

}  // namespace

med::CohortData read_cohort(const std::string& counts_path, const std::string& meta_path,
                            const std::vector<std::string>& part_order) {
  CountsTable table = parse_counts_csv(read_text_file(counts_path), part_order);

  auto rows = csv::parse(read_text_file(meta_path));
  if (rows.size() < 2) throw Error(errc::io_error, "metadata CSV needs a header and data rows");
  const auto& header = rows[0];
  std::size_t exposure_col = header.size(), response_col = header.size();
  std::vector<std::size_t> confounder_cols;
  for (std::size_t c = 1; c < header.size(); ++c) {
    if (header[c] == "exposure")
      exposure_col = c;
    else if (header[c] == "response")
      response_col = c;
    else
      confounder_cols.push_back(c);
  }
  if (exposure_col == header.size() || response_col == header.size())
    throw Error(errc::io_error, "metadata CSV needs 'exposure' and 'response' columns");

  struct MetaRow {
    int exposure;
    double response;
    std::string stratum;
  };
  std::map<std::string, MetaRow> by_id;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != header.size())
      throw Error(errc::io_error, "metadata CSV row " + std::to_string(r + 1) + " is ragged");
    MetaRow meta;
    const double e = parse_real(row[exposure_col], "metadata exposure");
    if (e != 0.0 && e != 1.0) throw Error(errc::io_error, "exposure must be 0 or 1");
    meta.exposure = static_cast<int>(e);
    meta.response = parse_real(row[response_col], "metadata response");
    for (std::size_t i = 0; i < confounder_cols.size(); ++i) {
      if (i) meta.stratum += ';';
      meta.stratum += row[confounder_cols[i]];
    }
    if (!by_id.emplace(row[0], meta).second)
      throw Error(errc::io_error, "duplicate sample id '" + row[0] + "' in metadata");
  }

  med::CohortData data;
  const Eigen::Index n = static_cast<Eigen::Index>(table.sample_ids.size());
  data.counts = table.counts;
  data.exposure.resize(n);
  data.response.resize(n);
  data.stratum.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    auto it = by_id.find(table.sample_ids[static_cast<std::size_t>(i)]);
    if (it == by_id.end())
      throw Error(errc::io_error, "sample '" + table.sample_ids[static_cast<std::size_t>(i)] +
                                      "' missing from metadata");
    data.exposure[i] = it->second.exposure;
    data.response[i] = it->second.response;
    data.stratum[static_cast<std::size_t>(i)] = it->second.stratum;
  }
  return data;
}

void write_cohort(const med::CohortData& data, const std::vector<std::string>& part_labels,
                  const std::string& counts_path, const std::string& meta_path) {
  if (static_cast<Eigen::Index>(part_labels.size()) != data.parts())
    throw Error(errc::dimension_mismatch, "one part label per count column required");

  std::vector<std::string> header{"sample_id"};
  header.insert(header.end(), part_labels.begin(), part_labels.end());
  std::string counts_text = csv::join_row(header);

  std::size_t n_confounders = 0;
  if (!data.stratum.empty())
    n_confounders = 1 + static_cast<std::size_t>(
                            std::count(data.stratum[0].begin(), data.stratum[0].end(), ';'));
  std::vector<std::string> meta_header{"sample_id", "exposure"};
  for (std::size_t c = 0; c < n_confounders; ++c)
    meta_header.push_back("c" + std::to_string(c + 1));
  meta_header.push_back("response");
  std::string meta_text = csv::join_row(meta_header);

  for (Eigen::Index i = 0; i < data.size(); ++i) {
    const std::string id = "s" + std::to_string(i + 1);
    std::vector<std::string> row{id};
    for (Eigen::Index j = 0; j < data.parts(); ++j)
      row.push_back(std::to_string(data.counts(i, j)));
    counts_text += csv::join_row(row);

    std::vector<std::string> meta{id, std::to_string(data.exposure[i])};
    std::string value;
    for (char ch : data.stratum[static_cast<std::size_t>(i)]) {
      if (ch == ';') {
        meta.push_back(value);
        value.clear();
      } else {
        value += ch;
      }
    }
    meta.push_back(value);
    meta.push_back(fmt(data.response[i]));
    meta_text += csv::join_row(meta);
  }
  write_text_file(counts_path, counts_text);
  write_text_file(meta_path, meta_text);
}

std::string meta_path_for(const std::string& counts_path) {
  const std::string suffix = ".csv";
  if (counts_path.size() > suffix.size() &&
      counts_path.compare(counts_path.size() - suffix.size(), suffix.size(), suffix) == 0)
    return counts_path.substr(0, counts_path.size() - suffix.size()) + ".meta.csv";
  return counts_path + ".meta";
}

std::string ilr_table_csv(const std::string& counts_text, const SbpFile& sbp_file,
                          double zero_replacement) {
  CountsTable table = parse_counts_csv(counts_text, sbp_file.sbp.part_labels);
  auto basis = coda::basis_from_sbp(sbp_file.sbp);
  std::vector<std::string> header{"sample_id"};
  header.insert(header.end(), sbp_file.balance_labels.begin(), sbp_file.balance_labels.end());
  std::string out = csv::join_row(header);
  for (Eigen::Index i = 0; i < table.counts.rows(); ++i) {
    auto comp = coda::close_counts(table.counts.row(i).transpose(), zero_replacement);
    Eigen::VectorXd m = coda::ilr_forward(comp, basis).coords();
    std::vector<std::string> row{table.sample_ids[static_cast<std::size_t>(i)]};
    for (Eigen::Index k = 0; k < m.size(); ++k) row.push_back(fmt(m[k]));
    out += csv::join_row(row);
  }
  return out;
}

std::string effects_csv(const med::MediationEstimate& estimate) {
  std::string out = "effect,point,se,ci_low,ci_high,beta,gamma\n";
  auto add = [&out](const std::string& name, const med::EffectEstimate& e, const std::string& beta,
                    const std::string& gamma) {
    out += name + "," + fmt(e.point) + "," + fmt(e.se) + "," + fmt(e.ci_low) + "," +
           fmt(e.ci_high) + "," + beta + "," + gamma + "\n";
  };
  add("te", estimate.te, "", "");
  add("nde", estimate.nde, "", "");
  add("oie", estimate.oie, "", "");
  for (std::size_t k = 0; k < estimate.cie.size(); ++k)
    add("cie" + std::to_string(k + 1), estimate.cie[k],
        fmt(estimate.beta_pooled[static_cast<Eigen::Index>(k)]),
        fmt(estimate.gamma_pooled[static_cast<Eigen::Index>(k)]));
  return out;
}

std::string effects_json(const med::MediationEstimate& estimate) {
  nlohmann::json j;
  auto effect = [](const med::EffectEstimate& e) {
    return nlohmann::json{
        {"point", e.point}, {"se", e.se}, {"ci_low", e.ci_low}, {"ci_high", e.ci_high}};
  };
  j["ci_level"] = estimate.ci_level;
  j["te"] = effect(estimate.te);
  j["nde"] = effect(estimate.nde);
  j["oie"] = effect(estimate.oie);
  j["cie"] = nlohmann::json::array();
  for (std::size_t k = 0; k < estimate.cie.size(); ++k) {
    nlohmann::json c = effect(estimate.cie[k]);
    c["coordinate"] = k + 1;
    c["beta"] = estimate.beta_pooled[static_cast<Eigen::Index>(k)];
    c["gamma"] = estimate.gamma_pooled[static_cast<Eigen::Index>(k)];
    j["cie"].push_back(c);
  }
  j["stratum_weights"] = estimate.stratum_weights;
  return j.dump(2) + "\n";
}

}  // namespace codamed::io
