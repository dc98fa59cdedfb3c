#include <charconv>
#include <fstream>
#include <sstream>

#include "json_codec.hpp"

#include "modad/synthdata.hpp"

namespace modad {

namespace {

constexpr const char* kMagic = "# modad-dataset v1";

void append_double(std::string& out, double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, end);
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    fields.push_back(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_number(std::string_view field, std::size_t line, const char* what) {
  field = trim(field);
  T value{};
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty())
    throw ParseError(line, std::string("non-numeric ") + what + " '" + std::string(field) + "'");
  return value;
}

}  // namespace

void write_dataset(const LabeledDataset& data, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  const int d = data.feature_dim();
  std::string out;
  out += kMagic;
  out += "\n# split: " + to_string(data.split_tag) + "\n";
  out += "# spec: " + codec::to_json(data.spec).dump() + "\n";
  out += "class,bias_attr,aligned";
  for (int j = 0; j < d; ++j) out += ",f" + std::to_string(j);
  out += '\n';
  for (const Sample& s : data.samples) {
    out += std::to_string(s.class_label);
    out += ',';
    out += std::to_string(s.bias_attribute);
    out += s.aligned ? ",1" : ",0";
    for (double v : s.features) {
      out += ',';
      append_double(out, v);
    }
    out += '\n';
  }
  os << out;
  if (!os) throw IoError("write to '" + path.string() + "' failed");
}

LabeledDataset read_dataset(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open dataset '" + path.string() + "'");

  LabeledDataset data;
  bool have_spec = false;
  std::size_t columns = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    std::string_view view = trim(line);
    if (view.empty()) continue;
    if (view.front() == '#') {
      view.remove_prefix(1);
      view = trim(view);
      if (view.starts_with("split:")) {
        data.split_tag = parse_split_tag(std::string(trim(view.substr(6))));
      } else if (view.starts_with("spec:")) {
        try {
          data.spec = codec::dataset_spec_from(nlohmann::json::parse(view.substr(5)), false);
          have_spec = true;
        } catch (const nlohmann::json::exception& e) {
          throw ParseError(line_no, std::string("bad spec comment: ") + e.what());
        }
      }
      continue;
    }
    const auto fields = split_fields(view);
    if (columns == 0) {
      if (fields.size() < 4 || trim(fields[0]) != "class" || trim(fields[1]) != "bias_attr" ||
          trim(fields[2]) != "aligned")
        throw ParseError(line_no, "expected header 'class,bias_attr,aligned,f0,...'");
      columns = fields.size();
      continue;
    }
    if (fields.size() != columns)
      throw ParseError(line_no, "expected " + std::to_string(columns) + " columns, found " +
                                    std::to_string(fields.size()));
    Sample s;
    s.class_label = parse_number<int>(fields[0], line_no, "class");
    s.bias_attribute = parse_number<int>(fields[1], line_no, "bias_attr");
    const int aligned = parse_number<int>(fields[2], line_no, "aligned");
    if (s.class_label < 0 || s.bias_attribute < 0)
      throw ParseError(line_no, "labels must be nonnegative");
    if (aligned != 0 && aligned != 1) throw ParseError(line_no, "aligned must be 0 or 1");
    s.aligned = aligned == 1;
    s.features.reserve(columns - 3);
    for (std::size_t j = 3; j < columns; ++j)
      s.features.push_back(parse_number<double>(fields[j], line_no, "feature"));
    data.samples.push_back(std::move(s));
  }
  if (columns == 0) throw ParseError(line_no, "missing header row");

  if (!have_spec) {
    // Files from other tools: infer what the rows can tell us.
    int k = 0, a = 0;
    for (const auto& s : data.samples) {
      k = std::max(k, s.class_label + 1);
      a = std::max(a, s.bias_attribute + 1);
    }
    data.spec.num_classes = std::max(k, 2);
    data.spec.num_bias_attributes = a;
  }
  return data;
}

}  // namespace modad
