#include "meshvote/eval.hpp"

#include <algorithm>
#include <cctype>
#include <iomanip>
#include <json.hpp>
#include <sstream>

#include "meshvote/error.hpp"
#include "meshvote/image_io.hpp"

namespace meshvote {
namespace {

std::string canonical(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  const auto e = s.find_last_not_of(" \t\r\n");
  s = b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::vector<FaceId> as_set(std::span<const FaceId> faces) {
  std::vector<FaceId> v(faces.begin(), faces.end());
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

std::vector<FaceId> restrict_to(std::vector<FaceId> faces, const std::vector<FaceId>& allowed) {
  std::vector<FaceId> out;
  std::set_intersection(faces.begin(), faces.end(), allowed.begin(), allowed.end(),
                        std::back_inserter(out));
  return out;
}

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

std::optional<int> GroundTruth::find_label(const std::string& name) const {
  const auto key = canonical(name);
  for (const auto& [id, n] : label_names) {
    if (canonical(n) == key) return id;
  }
  return std::nullopt;
}

std::string GroundTruth::name_of(int label) const {
  auto it = label_names.find(label);
  return it != label_names.end() ? it->second : "label_" + std::to_string(label);
}

std::vector<FaceId> GroundTruth::faces_with(int label) const {
  std::vector<FaceId> out;
  for (std::size_t f = 0; f < labels.size(); ++f) {
    if (labels[f] == label) out.push_back(static_cast<FaceId>(f));
  }
  return out;
}

GroundTruth parse_labels(const std::string& text) {
  GroundTruth gt;
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    try {
      const auto j = nlohmann::json::parse(text);
      gt.labels = j.at("labels").get<std::vector<int>>();
      if (j.contains("names")) {
        for (const auto& [key, value] : j["names"].items()) {
          gt.label_names[std::stoi(key)] = value.get<std::string>();
        }
      }
    } catch (const std::exception& e) {
      throw ParseError(std::string("labels: ") + e.what());
    }
  } else {
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto c = canonical(line);
      if (c.empty()) continue;
      try {
        std::size_t used = 0;
        gt.labels.push_back(std::stoi(c, &used));
        if (used != c.size()) throw std::invalid_argument(c);
      } catch (const std::exception&) {
        throw ParseError("labels:" + std::to_string(line_no) + ": not an integer: '" + line + "'");
      }
    }
  }
  for (int l : gt.labels) {
    if (l < -1) throw ParseError("labels: label ids must be >= -1");
  }
  return gt;
}

GroundTruth load_labels(const std::filesystem::path& path, std::optional<std::size_t> expected_faces) {
  if (!std::filesystem::exists(path)) throw IoError("labels file not found: " + path.string());
  GroundTruth gt = parse_labels(read_text_file(path));
  if (expected_faces && gt.labels.size() != *expected_faces) {
    throw LengthMismatch(path.string() + ": " + std::to_string(gt.labels.size()) +
                         " labels for a mesh with " + std::to_string(*expected_faces) + " faces");
  }
  return gt;
}

void save_labels(const GroundTruth& truth, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["labels"] = truth.labels;
  nlohmann::ordered_json names = nlohmann::ordered_json::object();
  for (const auto& [id, name] : truth.label_names) names[std::to_string(id)] = name;
  j["names"] = names;
  write_text_file(path, j.dump(2) + "\n");
}

double iou(std::span<const FaceId> predicted, std::span<const FaceId> truth) {
  const auto p = as_set(predicted);
  const auto t = as_set(truth);
  if (p.empty() && t.empty()) return 1.0;
  std::vector<FaceId> inter;
  std::set_intersection(p.begin(), p.end(), t.begin(), t.end(), std::back_inserter(inter));
  const double uni = static_cast<double>(p.size() + t.size() - inter.size());
  return static_cast<double>(inter.size()) / uni;
}

double weighted_iou(std::span<const FaceId> predicted, std::span<const FaceId> truth,
                    std::span<const double> weights) {
  const auto p = as_set(predicted);
  const auto t = as_set(truth);
  if (p.empty() && t.empty()) return 1.0;
  std::vector<FaceId> inter, uni;
  std::set_intersection(p.begin(), p.end(), t.begin(), t.end(), std::back_inserter(inter));
  std::set_union(p.begin(), p.end(), t.begin(), t.end(), std::back_inserter(uni));
  auto total = [&](const std::vector<FaceId>& s) {
    double w = 0.0;
    for (FaceId f : s) {
      if (f >= weights.size()) throw LengthMismatch("face weight missing for face " + std::to_string(f));
      w += weights[f];
    }
    return w;
  };
  const double u = total(uni);
  return u > 0.0 ? total(inter) / u : 1.0;
}

EvalReport evaluate_parts(std::span<const std::vector<FaceId>> predicted,
                          std::span<const int> part_labels, const GroundTruth& truth,
                          const EvalOptions& options) {
  if (predicted.size() != part_labels.size()) {
    throw LengthMismatch("one truth label is needed per predicted part");
  }
  const auto visible = as_set(options.visible_faces);
  EvalReport report;
  double sum = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    for (FaceId f : predicted[i]) {
      if (f >= truth.labels.size()) {
        throw LengthMismatch("prediction references face " + std::to_string(f) +
                             " beyond the labeled face count");
      }
    }
    auto p = as_set(predicted[i]);
    auto t = truth.faces_with(part_labels[i]);
    if (options.visible_only) {
      p = restrict_to(std::move(p), visible);
      t = restrict_to(std::move(t), visible);
    }
    const double value = options.area_weighted ? weighted_iou(p, t, options.face_areas) : iou(p, t);
    report.parts.push_back({truth.name_of(part_labels[i]), part_labels[i], value});
    sum += value;
  }
  report.miou = report.parts.empty() ? 0.0 : sum / static_cast<double>(report.parts.size());
  return report;
}

int resolve_label(const GroundTruth& truth, const std::string& grounding_text) {
  if (auto id = truth.find_label(grounding_text)) return *id;
  throw UnknownLabel("no ground-truth part named '" + grounding_text + "'");
}

EvalReport evaluate(const SegmentationResult& result, const GroundTruth& truth,
                    const EvalOptions& options, std::optional<int> target_label) {
  if (result.face_count() != 0 && result.face_count() != truth.labels.size()) {
    throw LengthMismatch("result covers " + std::to_string(result.face_count()) +
                         " faces, ground truth " + std::to_string(truth.labels.size()));
  }
  const int label = target_label ? *target_label : resolve_label(truth, result.query.grounding_text);
  const std::vector<FaceId> parts[1] = {result.member_faces};
  const int labels[1] = {label};
  return evaluate_parts(parts, labels, truth, options);
}

EvalReport evaluate_assignment(std::span<const int> assigned, std::span<const int> query_labels,
                               const GroundTruth& truth, const EvalOptions& options) {
  if (assigned.size() != truth.labels.size()) {
    throw LengthMismatch("assignment covers " + std::to_string(assigned.size()) +
                         " faces, ground truth " + std::to_string(truth.labels.size()));
  }
  std::vector<std::vector<FaceId>> parts(query_labels.size());
  for (std::size_t f = 0; f < assigned.size(); ++f) {
    const int q = assigned[f];
    if (q < 0) continue;
    if (static_cast<std::size_t>(q) >= parts.size()) throw UnknownLabel("assignment uses an unknown query index");
    parts[static_cast<std::size_t>(q)].push_back(static_cast<FaceId>(f));
  }
  return evaluate_parts(parts, query_labels, truth, options);
}

std::string eval_csv(std::span<const EvalReport> reports) {
  std::ostringstream os;
  os << "category,part,label,iou\n";
  for (const EvalReport& r : reports) {
    for (const PartIou& p : r.parts) {
      os << r.category << ',' << p.part << ',' << p.label << ',' << format_double(p.iou) << '\n';
    }
    os << r.category << ",miou,," << format_double(r.miou) << '\n';
  }
  return os.str();
}

std::vector<EvalReport> parse_eval_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<EvalReport> out;
  EvalReport current;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, ',')) cols.push_back(col);
    if (line.back() == ',') cols.emplace_back();
    if (cols.size() != 4) throw ParseError("eval csv: expected 4 columns: " + line);
    current.category = cols[0];
    if (cols[1] == "miou" && cols[2].empty()) {
      current.miou = std::stod(cols[3]);
      out.push_back(std::move(current));
      current = {};
    } else {
      current.parts.push_back({cols[1], std::stoi(cols[2]), std::stod(cols[3])});
    }
  }
  return out;
}

std::string eval_json(std::span<const EvalReport> reports) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const EvalReport& r : reports) {
    nlohmann::ordered_json parts = nlohmann::ordered_json::array();
    for (const PartIou& p : r.parts) parts.push_back({{"part", p.part}, {"label", p.label}, {"iou", p.iou}});
    arr.push_back({{"category", r.category}, {"parts", parts}, {"miou", r.miou}});
  }
  nlohmann::ordered_json j;
  j["reports"] = arr;
  nlohmann::ordered_json cats = nlohmann::ordered_json::array();
  for (const auto& [cat, mean] : category_means(reports)) cats.push_back({{"category", cat}, {"miou", mean}});
  j["categories"] = cats;
  return j.dump(2) + "\n";
}

std::vector<std::pair<std::string, double>> category_means(std::span<const EvalReport> reports) {
  std::vector<std::pair<std::string, double>> out;
  std::vector<int> counts;
  for (const EvalReport& r : reports) {
    auto it = std::find_if(out.begin(), out.end(), [&](const auto& e) { return e.first == r.category; });
    if (it == out.end()) {
      out.emplace_back(r.category, r.miou);
      counts.push_back(1);
    } else {
      it->second += r.miou;
      ++counts[static_cast<std::size_t>(it - out.begin())];
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i].second /= counts[i];
  return out;
}

}  // namespace meshvote
