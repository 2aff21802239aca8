#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

#include "mtraffic/error.hpp"
#include "mtraffic/ingest.hpp"

namespace mtraffic {

Summary summarize(std::span<const double> values, std::span<const std::uint64_t> weights) {
  if (!weights.empty() && weights.size() != values.size()) {
    throw Error(ErrorCode::SizeMismatch, "weights must be parallel to values");
  }
  std::map<double, std::uint64_t> freq;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::uint64_t w = weights.empty() ? 1 : weights[i];
    if (w > 0) freq[values[i]] += w;
  }
  Summary s;
  for (const auto& [x, w] : freq) s.count += w;
  if (s.count == 0) return s;
  s.defined = true;
  s.min = freq.begin()->first;
  s.max = freq.rbegin()->first;

  const double total = static_cast<double>(s.count);
  double sum = 0.0;
  std::uint64_t best = 0;
  for (const auto& [x, w] : freq) {
    sum += x * static_cast<double>(w);
    if (w > best) {
      best = w;
      s.mode = x;
    }
  }
  s.mean = sum / total;

  // Median: average of the order statistics at (count - 1) / 2 and count / 2.
  const std::uint64_t lo = (s.count - 1) / 2;
  const std::uint64_t hi = s.count / 2;
  std::uint64_t seen = 0;
  std::optional<double> lo_value;
  for (const auto& [x, w] : freq) {
    seen += w;
    if (!lo_value && seen > lo) lo_value = x;
    if (seen > hi) {
      s.median = (*lo_value + x) / 2.0;
      break;
    }
  }

  double m2 = 0.0;
  double m3 = 0.0;
  double m4 = 0.0;
  for (const auto& [x, w] : freq) {
    const double d = x - s.mean;
    const double dw = static_cast<double>(w);
    m2 += dw * d * d;
    m3 += dw * d * d * d;
    m4 += dw * d * d * d * d;
  }
  s.sd = s.count > 1 ? std::sqrt(m2 / (total - 1.0)) : 0.0;
  m2 /= total;
  m3 /= total;
  m4 /= total;
  if (m2 > 0.0) {
    s.skewness = m3 / std::pow(m2, 1.5);
    s.kurtosis = m4 / (m2 * m2) - 3.0;
  }
  return s;
}

CorpusStatistics corpus_stats(std::span<const WeightedTrajectory> corpus, const RoadNetwork& g) {
  std::vector<double> points;
  std::vector<std::uint64_t> point_weights;
  std::vector<double> meters;
  std::vector<std::uint64_t> meter_weights;
  for (const WeightedTrajectory& t : corpus) {
    if (t.count == 0 || t.vertices.empty()) continue;
    points.push_back(static_cast<double>(t.vertices.size()));
    point_weights.push_back(t.count);
    if (!g.has_lengths()) continue;
    double length = 0.0;
    bool valid = true;
    for (std::size_t j = 0; j + 1 < t.vertices.size() && valid; ++j) {
      const VertexId u = t.vertices[j];
      const VertexId v = t.vertices[j + 1];
      if (u == v) continue;
      const auto e = g.edge_id(u, v);
      if (e) length += g.length_m(*e);
      else valid = false;
    }
    if (valid) {
      meters.push_back(length);
      meter_weights.push_back(t.count);
    }
  }
  return {summarize(points, point_weights), summarize(meters, meter_weights)};
}

void write_length_histogram_csv(std::ostream& out, std::span<const WeightedTrajectory> corpus) {
  std::map<std::size_t, std::uint64_t> hist;
  for (const WeightedTrajectory& t : corpus) {
    if (t.count > 0 && !t.vertices.empty()) hist[t.vertices.size()] += t.count;
  }
  out << "length,count\n";
  for (const auto& [len, count] : hist) out << len << ',' << count << '\n';
}

}  // namespace mtraffic
