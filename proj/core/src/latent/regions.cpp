#include "survxai/latent/regions.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>

#include "survxai/error.hpp"
#include "survxai/util/format.hpp"

namespace survxai::latent {
namespace {

struct RegionValues {
  std::map<std::int32_t, std::vector<double>> by_label;
  std::vector<double> foreground;
};

RegionValues gather(const VariabilityMap& map, const io::Atlas& atlas) {
  if (!map.header.same_grid(atlas.header) || map.values.size() != atlas.labels.size()) {
    throw ShapeError("map dims do not match atlas dims");
  }
  RegionValues rv;
  for (const auto& [label, name] : atlas.label_table) {
    if (label != 0) rv.by_label[label];
  }
  for (std::size_t i = 0; i < map.values.size(); ++i) {
    const std::int32_t l = atlas.labels[i];
    if (l == 0) continue;
    rv.by_label[l].push_back(map.values[i]);
    rv.foreground.push_back(map.values[i]);
  }
  if (rv.foreground.empty()) throw ValidationError("atlas has no foreground voxels");
  return rv;
}

RegionRow describe(std::int32_t label, const io::Atlas& atlas, const std::vector<double>& vals) {
  RegionRow row;
  row.label = label;
  auto it = atlas.label_table.find(label);
  row.name = it != atlas.label_table.end() ? it->second : std::to_string(label);
  row.n_voxels = vals.size();
  if (!vals.empty()) {
    row.max = *std::max_element(vals.begin(), vals.end());
    row.min = *std::min_element(vals.begin(), vals.end());
  }
  return row;
}

}  // namespace

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw ValidationError("percentile of an empty set");
  if (!(p >= 0.0 && p <= 100.0)) throw ValidationError("percentile must be in [0, 100]");
  std::sort(values.begin(), values.end());
  const double pos = p / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

std::size_t RegionReport::selected_count() const {
  return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [](const RegionRow& r) { return r.selected; }));
}

std::string RegionReport::to_csv() const {
  std::string out = "region,n_voxels,max,frac_above,selected,min,frac_below\n";
  for (const RegionRow& r : rows) {
    out += r.name + ',' + std::to_string(r.n_voxels) + ',' + util::fmt_double(r.max) + ',' +
           util::fmt_double(r.frac_above) + ',' + (r.selected ? "1" : "0") + ',' + util::fmt_double(r.min) + ',' +
           util::fmt_double(r.frac_below) + '\n';
  }
  return out;
}

void RegionReport::write_csv(const std::filesystem::path& path) const { util::write_text(path, to_csv()); }

RegionReport significant_regions_euclidean(const VariabilityMap& map, const io::Atlas& atlas,
                                           const EuclideanRule& rule) {
  if (map.kind != MapKind::euclidean) throw ValidationError("euclidean region rule needs a euclidean map");
  const RegionValues rv = gather(map, atlas);
  RegionReport report;
  report.kind = MapKind::euclidean;
  report.high_cutoff = percentile(rv.foreground, rule.peak_percentile);
  report.low_cutoff = percentile(rv.foreground, rule.extent_percentile);
  for (const auto& [label, vals] : rv.by_label) {
    RegionRow row = describe(label, atlas, vals);
    if (!vals.empty()) {
      const auto above = std::count_if(vals.begin(), vals.end(), [&](double v) { return v > report.low_cutoff; });
      row.frac_above = static_cast<double>(above) / static_cast<double>(vals.size());
      row.selected = row.max > report.high_cutoff && row.frac_above >= rule.extent_fraction;
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

RegionReport significant_regions_cosine(const VariabilityMap& map, const io::Atlas& atlas, const CosineRule& rule) {
  if (map.kind != MapKind::cosine) throw ValidationError("cosine region rule needs a cosine map");
  const RegionValues rv = gather(map, atlas);
  RegionReport report;
  report.kind = MapKind::cosine;
  report.high_cutoff = percentile(rv.foreground, rule.low_percentile);
  std::vector<double> sizes;
  for (const auto& [label, vals] : rv.by_label) {
    if (!vals.empty()) sizes.push_back(static_cast<double>(vals.size()));
  }
  report.low_cutoff = percentile(sizes, rule.size_percentile);
  for (const auto& [label, vals] : rv.by_label) {
    RegionRow row = describe(label, atlas, vals);
    if (!vals.empty()) {
      const auto below = std::count_if(vals.begin(), vals.end(), [&](double v) { return v < report.high_cutoff; });
      row.frac_below = static_cast<double>(below) / static_cast<double>(vals.size());
      row.selected = row.min < report.high_cutoff && static_cast<double>(row.n_voxels) >= report.low_cutoff;
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace survxai::latent
