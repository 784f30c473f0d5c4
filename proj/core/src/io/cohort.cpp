#include "survxai/io/cohort.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "survxai/error.hpp"

namespace survxai::io {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  return out;
}

}  // namespace

std::string_view to_string(Stage s) { return s == Stage::pre ? "pre" : "post"; }
std::string_view to_string(Group g) { return g == Group::longer ? "longer" : "shorter"; }

Stage parse_stage(std::string_view s) {
  if (s == "pre") return Stage::pre;
  if (s == "post") return Stage::post;
  throw ValidationError("unknown stage '" + std::string(s) + "' (expected pre|post)");
}

Group parse_group(std::string_view s) {
  if (s == "longer") return Group::longer;
  if (s == "shorter") return Group::shorter;
  throw ValidationError("unknown group '" + std::string(s) + "' (expected longer|shorter)");
}

std::string ManifestRecord::key() const { return subject_id + "_" + std::string(to_string(stage)); }

CohortManifest CohortManifest::read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(IoError::Kind::open_failed, "cannot open manifest " + path.string());
  const std::filesystem::path base = path.parent_path();
  CohortManifest m;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto f = split_csv(t);
    if (f.size() < 4 || f.size() > 5) {
      throw IoError(IoError::Kind::parse, path.string() + ":" + std::to_string(lineno) +
                                              ": expected id,stage,group,path[,mask-path]");
    }
    ManifestRecord r;
    r.subject_id = f[0];
    try {
      r.stage = parse_stage(f[1]);
      r.group = parse_group(f[2]);
    } catch (const ValidationError& e) {
      throw IoError(IoError::Kind::parse, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    auto resolve = [&](const std::string& p) {
      std::filesystem::path fp(p);
      return fp.is_absolute() ? fp : base / fp;
    };
    r.volume_path = resolve(f[3]);
    if (f.size() == 5 && !f[4].empty()) r.mask_path = resolve(f[4]);
    m.records.push_back(std::move(r));
  }
  m.validate();
  for (const auto& r : m.records) {
    if (!std::filesystem::exists(r.volume_path)) {
      throw IoError(IoError::Kind::open_failed, "manifest volume missing: " + r.volume_path.string());
    }
    if (r.mask_path && !std::filesystem::exists(*r.mask_path)) {
      throw IoError(IoError::Kind::open_failed, "manifest mask missing: " + r.mask_path->string());
    }
  }
  return m;
}

void CohortManifest::write(const std::filesystem::path& path) const {
  validate();
  const std::filesystem::path base = path.parent_path();
  auto rel = [&](const std::filesystem::path& p) {
    return base.empty() ? p.generic_string() : p.lexically_relative(base).generic_string();
  };
  std::ostringstream out;
  out << "# id,stage,group,path[,mask-path]\n";
  for (const auto& r : records) {
    out << r.subject_id << ',' << to_string(r.stage) << ',' << to_string(r.group) << ','
        << rel(r.volume_path);
    if (r.mask_path) out << ',' << rel(*r.mask_path);
    out << '\n';
  }
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError(IoError::Kind::write_failed, "cannot write manifest " + path.string());
  f << out.str();
}

void CohortManifest::validate() const {
  std::set<std::string> seen;
  for (const auto& r : records) {
    if (r.subject_id.empty()) throw ValidationError("manifest record with empty subject id");
    if (!seen.insert(r.key()).second) {
      throw ValidationError("duplicate manifest record for " + r.subject_id + "/" +
                            std::string(to_string(r.stage)));
    }
  }
}

std::vector<const ManifestRecord*> CohortManifest::select(std::optional<Stage> stage,
                                                          std::optional<Group> group) const {
  std::vector<const ManifestRecord*> out;
  for (const auto& r : records) {
    if (stage && r.stage != *stage) continue;
    if (group && r.group != *group) continue;
    out.push_back(&r);
  }
  return out;
}

void CohortMatrix::validate() const {
  if (labels.size() != rows()) throw ShapeError("cohort matrix has " + std::to_string(rows()) +
                                                " rows but " + std::to_string(labels.size()) + " labels");
  if (cols() != header.voxel_count()) throw ShapeError("cohort matrix columns do not match header voxels");
  std::set<std::pair<std::string, Stage>> seen;
  for (const auto& l : labels) {
    if (!seen.insert({l.subject_id, l.stage}).second) {
      throw ValidationError("duplicate cohort row " + l.subject_id + "/" + std::string(to_string(l.stage)));
    }
  }
}

CohortMatrix CohortMatrix::subset(std::optional<Stage> stage, std::optional<Group> group) const {
  std::vector<Eigen::Index> keep;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (stage && labels[i].stage != *stage) continue;
    if (group && labels[i].group != *group) continue;
    keep.push_back(static_cast<Eigen::Index>(i));
  }
  CohortMatrix out;
  out.header = header;
  out.data.resize(static_cast<Eigen::Index>(keep.size()), data.cols());
  for (std::size_t r = 0; r < keep.size(); ++r) {
    out.data.row(static_cast<Eigen::Index>(r)) = data.row(keep[r]);
    out.labels.push_back(labels[static_cast<std::size_t>(keep[r])]);
  }
  return out;
}

CohortMatrix CohortMatrix::stack(const std::vector<Volume>& volumes, std::vector<RowLabel> labels) {
  if (volumes.empty()) throw ValidationError("cohort matrix needs at least one volume");
  CohortMatrix m;
  m.header = volumes.front().header;
  m.header.dtype = DType::f32;
  m.data.resize(static_cast<Eigen::Index>(volumes.size()),
                static_cast<Eigen::Index>(m.header.voxel_count()));
  for (std::size_t i = 0; i < volumes.size(); ++i) {
    if (!volumes[i].header.same_grid(m.header)) {
      throw ShapeError("cohort volume " + std::to_string(i) + " is on a different grid");
    }
    m.data.row(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const Eigen::RowVectorXf>(volumes[i].voxels.data(), m.data.cols());
  }
  m.labels = std::move(labels);
  m.validate();
  return m;
}

CohortMatrix CohortMatrix::concat(const CohortMatrix& a, const CohortMatrix& b) {
  if (!a.header.same_grid(b.header)) throw ShapeError("cannot concatenate cohorts on different grids");
  CohortMatrix m;
  m.header = a.header;
  m.data.resize(a.data.rows() + b.data.rows(), a.data.cols());
  m.data << a.data, b.data;
  m.labels = a.labels;
  m.labels.insert(m.labels.end(), b.labels.begin(), b.labels.end());
  m.validate();
  return m;
}

CohortMatrix load_cohort(const std::vector<const ManifestRecord*>& records, bool masks) {
  std::vector<Volume> volumes;
  std::vector<RowLabel> labels;
  for (const ManifestRecord* r : records) {
    if (masks && !r->mask_path) throw ValidationError("record " + r->key() + " has no tumour mask");
    volumes.push_back(read_volume(masks ? *r->mask_path : r->volume_path));
    labels.push_back({r->subject_id, r->stage, r->group});
  }
  return CohortMatrix::stack(volumes, std::move(labels));
}

}  // namespace survxai::io
