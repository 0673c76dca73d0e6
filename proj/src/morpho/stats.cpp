#include "mitoviz/morpho/stats.hpp"

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <limits>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>

#include "mitoviz/core/error.hpp"

namespace mitoviz {
namespace {

struct DensityTerms {
  double members = 0.0;
  double structure = 0.0;
};

DensityTerms density_terms(std::span<const MeasuredObject> members, const StructureLabelRaster& labels) {
  DensityTerms t;
  std::array<bool, kStructureClassCount> used{};
  for (const MeasuredObject& m : members) {
    t.members += static_cast<double>(m.pixel_count);
    used[static_cast<std::size_t>(m.features.structure)] = true;
  }
  used[0] = false;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (used[labels[i]]) t.structure += 1.0;
  return t;
}

double mean(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_variance(std::span<const double> v, double m) {
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

std::string now_iso8601() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::string csv_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string csv_optional(const std::optional<double>& v) { return v ? csv_number(*v) : std::string(); }

std::vector<double> values(std::span<const FeatureVector> fv, Feature f) {
  std::vector<double> out;
  out.reserve(fv.size());
  for (const FeatureVector& v : fv) out.push_back(v.value(f));
  return out;
}

std::vector<FeatureVector> flatten(const Snapshot& s) {
  std::vector<FeatureVector> out;
  for (const auto& image : s.features) out.insert(out.end(), image.begin(), image.end());
  return out;
}

void set_optional(nlohmann::json& j, const char* key, const std::optional<double>& v) {
  j[key] = v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::optional<double> get_optional(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

}  // namespace

double density(std::span<const MeasuredObject> members, const StructureLabelRaster& labels) {
  if (members.empty()) return 0.0;
  const DensityTerms t = density_terms(members, labels);
  if (t.structure == 0.0) throw ValidationError("subset", "members lie in no labelled structure");
  return t.members / t.structure;
}

Snapshot record_snapshot(std::span<const SnapshotPart> parts, std::string comment, std::string group) {
  Snapshot s;
  s.comment = std::move(comment);
  s.group = std::move(group);
  DensityTerms pooled;
  std::array<double, 4> sums{};
  for (const SnapshotPart& part : parts) {
    if (!part.members.empty() && part.labels == nullptr)
      throw ValidationError("labels", "image '" + part.image + "' has members but no labels");
    s.images.push_back(part.image);
    std::vector<ObjectId> ids;
    std::vector<FeatureVector> fv;
    for (const MeasuredObject& m : part.members) {
      ids.push_back(m.id);
      fv.push_back(m.features);
      for (std::size_t k = 0; k < 4; ++k) sums[k] += m.features.value(kNumericFeatures[k]);
    }
    if (!part.members.empty()) {
      const DensityTerms t = density_terms(part.members, *part.labels);
      pooled.members += t.members;
      pooled.structure += t.structure;
    }
    s.count += part.members.size();
    s.members.push_back(std::move(ids));
    s.features.push_back(std::move(fv));
  }
  if (s.count > 0) {
    if (pooled.structure == 0.0) throw ValidationError("subset", "members lie in no labelled structure");
    s.density = pooled.members / pooled.structure;
    const double n = static_cast<double>(s.count);
    s.mean_area_um2 = sums[0] / n;
    s.mean_circularity = sums[1] / n;
    s.mean_eccentricity = sums[2] / n;
    s.mean_length_um = sums[3] / n;
  }
  return s;
}

void to_json(nlohmann::json& j, const Snapshot& s) {
  j = nlohmann::json{{"id", s.id},       {"comment", s.comment}, {"group", s.group},
                     {"images", s.images}, {"count", s.count},    {"density", s.density},
                     {"created_at", s.created_at}};
  set_optional(j, "mean_area_um2", s.mean_area_um2);
  set_optional(j, "mean_length_um", s.mean_length_um);
  set_optional(j, "mean_eccentricity", s.mean_eccentricity);
  set_optional(j, "mean_circularity", s.mean_circularity);
  auto& members = j["members"] = nlohmann::json::array();
  for (std::size_t i = 0; i < s.members.size(); ++i) {
    auto objects = nlohmann::json::array();
    for (std::size_t k = 0; k < s.members[i].size(); ++k) {
      const FeatureVector& f = s.features[i][k];
      objects.push_back({{"id", s.members[i][k]},
                         {"area_um2", f.area_um2},
                         {"circularity", f.circularity},
                         {"eccentricity", f.eccentricity},
                         {"length_um", f.length_um},
                         {"structure", to_string(f.structure)}});
    }
    members.push_back(std::move(objects));
  }
}

void from_json(const nlohmann::json& j, Snapshot& s) {
  s = Snapshot{};
  s.id = j.value("id", std::uint64_t{0});
  s.comment = j.value("comment", std::string());
  s.group = j.value("group", std::string());
  s.images = j.at("images").get<std::vector<std::string>>();
  s.count = j.at("count").get<std::size_t>();
  s.density = j.at("density").get<double>();
  s.created_at = j.value("created_at", std::string());
  s.mean_area_um2 = get_optional(j, "mean_area_um2");
  s.mean_length_um = get_optional(j, "mean_length_um");
  s.mean_eccentricity = get_optional(j, "mean_eccentricity");
  s.mean_circularity = get_optional(j, "mean_circularity");
  for (const auto& objects : j.at("members")) {
    std::vector<ObjectId> ids;
    std::vector<FeatureVector> fv;
    for (const auto& o : objects) {
      ids.push_back(o.at("id").get<ObjectId>());
      FeatureVector f;
      f.area_um2 = o.at("area_um2").get<double>();
      f.circularity = o.at("circularity").get<double>();
      f.eccentricity = o.at("eccentricity").get<double>();
      f.length_um = o.at("length_um").get<double>();
      f.structure = structure_class_from_string(o.at("structure").get<std::string>());
      fv.push_back(f);
    }
    s.members.push_back(std::move(ids));
    s.features.push_back(std::move(fv));
  }
  if (s.members.size() != s.images.size()) throw ValidationError("members", "one member list per image expected");
}

std::string snapshots_csv(std::span<const Snapshot> snapshots) {
  std::ostringstream out;
  out << kSnapshotCsvHeader << "\r\n";
  for (const Snapshot& s : snapshots) {
    std::string images;
    for (std::size_t i = 0; i < s.images.size(); ++i) images += (i ? ";" : "") + s.images[i];
    out << s.id << ',' << csv_field(s.comment) << ',' << csv_field(s.group) << ',' << csv_field(images) << ','
        << s.count << ',' << csv_number(s.density) << ',' << csv_optional(s.mean_area_um2) << ','
        << csv_optional(s.mean_length_um) << ',' << csv_optional(s.mean_eccentricity) << ','
        << csv_optional(s.mean_circularity) << "\r\n";
  }
  return out.str();
}

const Snapshot& SnapshotStore::add(Snapshot s) {
  std::lock_guard lock(mu_);
  s.id = items_.size() + 1;
  if (s.created_at.empty()) s.created_at = now_iso8601();
  items_.push_back(std::move(s));
  return items_.back();
}

std::vector<Snapshot> SnapshotStore::list() const {
  std::lock_guard lock(mu_);
  return items_;
}

std::optional<Snapshot> SnapshotStore::find(std::uint64_t id) const {
  std::lock_guard lock(mu_);
  if (id == 0 || id > items_.size()) return std::nullopt;
  return items_[id - 1];
}

std::string SnapshotStore::csv() const {
  std::lock_guard lock(mu_);
  return snapshots_csv(items_);
}

double percent_difference(double fv1, double fv2) {
  if (fv1 == 0.0) throw ValidationError("fv1", "reference value must be non-zero");
  return (fv1 - fv2) / fv1 * 100.0;
}

WelchResult welch_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw ValidationError("samples", "each side needs at least two values");
  const double ma = mean(a), mb = mean(b);
  const double va = sample_variance(a, ma) / static_cast<double>(a.size());
  const double vb = sample_variance(b, mb) / static_cast<double>(b.size());
  WelchResult r;
  const double se2 = va + vb;
  if (se2 == 0.0) {
    r.df = static_cast<double>(a.size() + b.size() - 2);
    if (ma == mb) return r;
    r.t = ma > mb ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    r.p = 0.0;
    return r;
  }
  r.t = (ma - mb) / std::sqrt(se2);
  r.df = se2 * se2 /
         (va * va / static_cast<double>(a.size() - 1) + vb * vb / static_cast<double>(b.size() - 1));
  const boost::math::students_t dist(r.df);
  r.p = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(r.t))));
  return r;
}

std::vector<FeatureComparison> compare(std::span<const FeatureVector> a, std::span<const FeatureVector> b) {
  if (a.empty() || b.empty()) throw ValidationError("snapshots", "both sides need at least one object");
  std::vector<FeatureComparison> out;
  for (Feature f : kNumericFeatures) {
    const auto va = values(a, f), vb = values(b, f);
    FeatureComparison c;
    c.feature = f;
    c.mean_a = mean(va);
    c.mean_b = mean(vb);
    c.percent_difference = c.mean_a != 0.0 ? percent_difference(c.mean_a, c.mean_b)
                                             : std::numeric_limits<double>::quiet_NaN();
    if (va.size() >= 2 && vb.size() >= 2) c.test = welch_t_test(va, vb);
    out.push_back(c);
  }
  return out;
}

std::vector<FeatureComparison> compare(const Snapshot& a, const Snapshot& b) {
  const auto fa = flatten(a), fb = flatten(b);
  return compare(fa, fb);
}

double accuracy(double len_c, double len_m) {
  if (!(len_c > 0.0)) throw ValidationError("len_c", "must be > 0");
  return (1.0 - std::fabs(len_c - len_m) / len_c) * 100.0;
}

}  // namespace mitoviz
