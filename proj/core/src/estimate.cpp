#include "modad/estimate.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>

#include <json.hpp>

#include "modad/common.hpp"
#include "modad/synthdata.hpp"

namespace modad {

std::size_t BiasSplitEstimate::conflicting_count() const {
  return static_cast<std::size_t>(std::count(aligned.begin(), aligned.end(), false));
}

std::vector<int> BiasSplitEstimate::group_labels() const {
  std::vector<int> out;
  out.reserve(aligned.size());
  for (bool a : aligned) out.push_back(a ? 1 : 0);
  return out;
}

BiasSplitEstimate oracle_estimate(const LabeledDataset& data) {
  BiasSplitEstimate est;
  est.aligned = data.aligned_flags();
  est.method = "oracle";
  return est;
}

BiasSplitEstimate inverted_estimate(const BiasSplitEstimate& estimate) {
  BiasSplitEstimate out = estimate;
  out.aligned.flip();
  out.method = estimate.method + "-inverted";
  return out;
}

void write_estimate(const BiasSplitEstimate& estimate, const std::filesystem::path& csv_path,
                    const std::filesystem::path& json_path) {
  {
    std::ofstream os(csv_path, std::ios::trunc);
    if (!os) throw IoError("cannot write estimate '" + csv_path.string() + "'");
    os << "sample_index,aligned_pred\n";
    for (std::size_t i = 0; i < estimate.aligned.size(); ++i)
      os << i << ',' << (estimate.aligned[i] ? 1 : 0) << '\n';
  }
  nlohmann::json j;
  j["method"] = estimate.method;
  j["samples"] = estimate.size();
  j["conflicting"] = estimate.conflicting_count();
  if (estimate.jtt_epochs > 0) j["jtt_epochs"] = estimate.jtt_epochs;
  auto& classes = j["classes"] = nlohmann::json::array();
  for (const auto& c : estimate.classes) {
    classes.push_back({{"class", c.class_id},
                       {"psi", c.population},
                       {"correct", c.correct_count},
                       {"alpha", c.alpha},
                       {"tau", c.tau},
                       {"flagged_conflicting", c.flagged_conflicting},
                       {"fit_fallback", c.fit_fallback},
                       {"zero_budget", c.zero_budget},
                       {"regularized", c.regularized}});
  }
  std::ofstream os(json_path, std::ios::trunc);
  if (!os) throw IoError("cannot write estimate diagnostics '" + json_path.string() + "'");
  os << j.dump(2) << '\n';
}

BiasSplitEstimate read_estimate(const std::filesystem::path& csv_path, const std::filesystem::path& json_path) {
  BiasSplitEstimate est;
  std::ifstream is(csv_path);
  if (!is) throw IoError("cannot open estimate '" + csv_path.string() + "'");
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (!header) {
      if (line != "sample_index,aligned_pred") throw ParseError(line_no, "expected header 'sample_index,aligned_pred'");
      header = true;
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos)
      throw ParseError(line_no, "expected two columns");
    std::size_t index = 0;
    int flag = -1;
    const auto r1 = std::from_chars(line.data(), line.data() + comma, index);
    const auto r2 = std::from_chars(line.data() + comma + 1, line.data() + line.size(), flag);
    if (r1.ec != std::errc() || r2.ec != std::errc() || r2.ptr != line.data() + line.size() || (flag != 0 && flag != 1))
      throw ParseError(line_no, "malformed estimate row");
    if (index != est.aligned.size()) throw ParseError(line_no, "sample_index out of sequence");
    est.aligned.push_back(flag == 1);
  }
  if (!header) throw ParseError(line_no, "missing header row");

  std::ifstream js(json_path);
  if (!js) return est;
  try {
    const auto j = nlohmann::json::parse(js);
    est.method = j.value("method", std::string());
    est.jtt_epochs = j.value("jtt_epochs", 0);
    for (const auto& c : j.value("classes", nlohmann::json::array())) {
      ClassDiagnostics d;
      d.class_id = c.value("class", 0);
      d.population = c.value("psi", std::size_t{0});
      d.correct_count = c.value("correct", std::size_t{0});
      d.alpha = c.value("alpha", 0.0);
      d.tau = c.value("tau", 0.0);
      d.flagged_conflicting = c.value("flagged_conflicting", std::size_t{0});
      d.fit_fallback = c.value("fit_fallback", false);
      d.zero_budget = c.value("zero_budget", false);
      d.regularized = c.value("regularized", false);
      est.classes.push_back(std::move(d));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError("estimate diagnostics '" + json_path.string() + "' invalid: " + e.what());
  }
  return est;
}

}  // namespace modad
