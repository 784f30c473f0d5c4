#include "survxai/pipeline/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <nlohmann/json.hpp>
#include <numbers>
#include <random>

#include "survxai/error.hpp"
#include "survxai/util/format.hpp"

namespace survxai::pipeline {
namespace {

struct Grid {
  std::array<std::uint32_t, 3> dims;
  std::size_t index(std::size_t z, std::size_t y, std::size_t x) const { return (z * dims[1] + y) * dims[2] + x; }
  std::array<double, 3> centre() const {
    return {(dims[0] - 1) / 2.0, (dims[1] - 1) / 2.0, (dims[2] - 1) / 2.0};
  }
  std::array<double, 3> semi_axes() const { return {0.42 * dims[0], 0.40 * dims[1], 0.44 * dims[2]}; }
};

double ellipsoid_radius(const std::array<double, 3>& p, const std::array<double, 3>& c, const std::array<double, 3>& a) {
  double r = 0.0;
  for (std::size_t i = 0; i < 3; ++i) r += ((p[i] - c[i]) / a[i]) * ((p[i] - c[i]) / a[i]);
  return std::sqrt(r);
}

double distance(const std::array<double, 3>& p, const std::array<double, 3>& c) {
  double r = 0.0;
  for (std::size_t i = 0; i < 3; ++i) r += (p[i] - c[i]) * (p[i] - c[i]);
  return std::sqrt(r);
}

io::Atlas make_atlas(const Grid& g) {
  io::Atlas atlas;
  atlas.header.dims = g.dims;
  atlas.header.dtype = io::DType::i32;
  atlas.labels.assign(atlas.header.voxel_count(), 0);
  const auto c = g.centre();
  const auto a = g.semi_axes();
  const char* side[2] = {"L", "R"};
  const char* vert[2] = {"inf", "sup"};
  const char* ap[2] = {"post", "ant"};
  for (int s = 0; s < 2; ++s)
    for (int v = 0; v < 2; ++v)
      for (int q = 0; q < 2; ++q) atlas.label_table[1 + s * 4 + v * 2 + q] = std::string(side[s]) + "_" + vert[v] + "_" + ap[q];
  for (std::size_t z = 0; z < g.dims[0]; ++z)
    for (std::size_t y = 0; y < g.dims[1]; ++y)
      for (std::size_t x = 0; x < g.dims[2]; ++x) {
        const std::array<double, 3> p{double(z), double(y), double(x)};
        if (ellipsoid_radius(p, c, a) > 1.0) continue;
        const int s = p[2] < c[2] ? 0 : 1, v = p[0] < c[0] ? 0 : 1, q = p[1] < c[1] ? 0 : 1;
        atlas.labels[g.index(z, y, x)] = 1 + s * 4 + v * 2 + q;
      }
  return atlas;
}

}  // namespace

void SyntheticSpec::validate() const {
  if (n_per_group < 2) throw ValidationError("synthetic cohort needs at least 2 subjects per group");
  for (std::uint32_t d : dims) {
    if (d < 8) throw ValidationError("synthetic volume dims must be at least 8");
  }
  if (!(lesion_radius[0] > 0.0 && lesion_radius[1] >= lesion_radius[0])) {
    throw ValidationError("lesion radius range must be positive and ordered");
  }
  if (!(signal_strength >= 0.0 && signal_strength <= 1.0)) throw ValidationError("signal strength must be in [0, 1]");
  if (!(noise_std >= 0.0)) throw ValidationError("texture noise std must be non-negative");
  if (!(rim_width >= 0.0)) throw ValidationError("rim width must be non-negative");
}

SyntheticCohort generate(const SyntheticSpec& spec) {
  spec.validate();
  const Grid g{spec.dims};
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);

  SyntheticCohort out;
  out.atlas = make_atlas(g);
  const auto c = g.centre();
  const auto a = g.semi_axes();

  for (std::size_t i = 0; i < 2 * spec.n_per_group; ++i) {
    SubjectTruth t;
    char id[32];
    std::snprintf(id, sizeof id, "sub-%03zu", i + 1);
    t.subject_id = id;
    t.group = i < spec.n_per_group ? io::Group::longer : io::Group::shorter;
    const bool agrees = unit(rng) < (1.0 + spec.signal_strength) / 2.0;
    const bool shorter = t.group == io::Group::shorter;
    t.left = shorter == agrees;
    t.radius = spec.lesion_radius[0] + unit(rng) * (spec.lesion_radius[1] - spec.lesion_radius[0]);
    if (shorter) t.radius += 0.5 * spec.signal_strength;
    t.centre = {c[0] + (unit(rng) - 0.5) * 0.5 * a[0], c[1] + (unit(rng) - 0.5) * 0.5 * a[1],
                c[2] + (t.left ? -0.5 : 0.5) * a[2]};

    std::array<double, 3> axes;
    for (std::size_t k = 0; k < 3; ++k) axes[k] = a[k] * (0.95 + 0.1 * unit(rng));
    std::array<std::array<double, 3>, 3> freq, phase;
    for (auto& f : freq)
      for (double& v : f) v = 1.0 + std::floor(unit(rng) * 2.0);
    for (auto& p : phase)
      for (double& v : p) v = unit(rng) * 2.0 * std::numbers::pi;

    io::Volume pre = io::Volume::zeros(spec.dims), post = io::Volume::zeros(spec.dims), mask = io::Volume::zeros(spec.dims);
    for (std::size_t z = 0; z < g.dims[0]; ++z)
      for (std::size_t y = 0; y < g.dims[1]; ++y)
        for (std::size_t x = 0; x < g.dims[2]; ++x) {
          const std::array<double, 3> p{double(z), double(y), double(x)};
          if (ellipsoid_radius(p, c, axes) > 1.0) continue;
          double texture = 0.5;
          for (std::size_t k = 0; k < 3; ++k) {
            double arg = phase[k][0];
            for (std::size_t ax = 0; ax < 3; ++ax) arg += 2.0 * std::numbers::pi * freq[k][ax] * p[ax] / g.dims[ax];
            texture += 0.05 * std::sin(arg);
          }
          const double eps = spec.noise_std * noise(rng);
          const std::size_t idx = g.index(z, y, x);
          const double r = distance(p, t.centre);
          const double base = texture + eps;
          if (r <= t.radius) {
            pre.voxels[idx] = static_cast<float>(1.0 + eps);
            post.voxels[idx] = 0.0f;
            mask.voxels[idx] = 1.0f;
          } else {
            pre.voxels[idx] = static_cast<float>(base);
            post.voxels[idx] = static_cast<float>(r <= t.radius + spec.rim_width ? base * spec.rim_factor : base);
          }
        }
    out.pre.push_back(std::move(pre));
    out.post.push_back(std::move(post));
    out.masks.push_back(std::move(mask));
    out.truth.push_back(t);
  }
  return out;
}

io::CohortManifest write_cohort(const SyntheticCohort& cohort, const SyntheticSpec& spec, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "volumes");
  std::filesystem::create_directories(dir / "masks");
  io::write_atlas(cohort.atlas, dir / "atlas.xvol");
  io::CohortManifest manifest;
  nlohmann::json truth = nlohmann::json::array();
  for (std::size_t i = 0; i < cohort.truth.size(); ++i) {
    const SubjectTruth& t = cohort.truth[i];
    const auto mask_path = dir / "masks" / (t.subject_id + "_mask.xvol");
    io::write_volume(cohort.masks[i], mask_path);
    for (io::Stage stage : {io::Stage::pre, io::Stage::post}) {
      const auto path = dir / "volumes" / (t.subject_id + "_" + std::string(io::to_string(stage)) + ".xvol");
      io::write_volume(stage == io::Stage::pre ? cohort.pre[i] : cohort.post[i], path);
      manifest.records.push_back({t.subject_id, stage, t.group, path, mask_path});
    }
    truth.push_back({{"subject", t.subject_id},
                     {"group", std::string(io::to_string(t.group))},
                     {"hemisphere", t.left ? "left" : "right"},
                     {"centre", t.centre},
                     {"radius", t.radius}});
  }
  manifest.write(dir / "manifest.csv");
  nlohmann::json doc = {{"seed", spec.seed},
                        {"signal_strength", spec.signal_strength},
                        {"dims", spec.dims},
                        {"planted_mode", "lesion spheres (bright pre, zeroed post)"},
                        {"subjects", truth}};
  util::write_text(dir / "ground_truth.json", doc.dump(2) + "\n");
  return manifest;
}

double hemisphere_contrast(const io::Volume& v, const io::Atlas& atlas) {
  if (!v.header.same_grid(atlas.header)) throw ShapeError("volume and atlas grids differ");
  double left = 0.0, right = 0.0;
  std::size_t nl = 0, nr = 0;
  for (std::size_t i = 0; i < v.voxels.size(); ++i) {
    const std::int32_t l = atlas.labels[i];
    if (l == 0) continue;
    if (l <= 4) {
      left += v.voxels[i];
      ++nl;
    } else {
      right += v.voxels[i];
      ++nr;
    }
  }
  if (nl == 0 || nr == 0) throw ValidationError("atlas lacks a hemisphere");
  return left / static_cast<double>(nl) - right / static_cast<double>(nr);
}

}  // namespace survxai::pipeline
