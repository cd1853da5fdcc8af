#include "fieldrecon/kdtree.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <queue>
#include <stdexcept>

namespace fieldrecon {

KdIndex::KdIndex(const ClimatePointCloud& pc, std::size_t leaf_size)
    : leaf_size_(std::max<std::size_t>(1, leaf_size)) {
  lat_.reserve(pc.size());
  lon_.reserve(pc.size());
  for (const auto& p : pc) {
    lat_.push_back(p.lat());
    lon_.push_back(p.lon());
  }
  perm_.resize(pc.size());
  for (std::size_t i = 0; i < perm_.size(); ++i) perm_[i] = i;
  nodes_.reserve(2 * pc.size() / leaf_size_ + 1);
  build(0, perm_.size(), 0);
}

int KdIndex::build(std::size_t begin, std::size_t end, std::size_t level) {
  Node node{lat_[perm_[begin]], lat_[perm_[begin]], lon_[perm_[begin]], lon_[perm_[begin]],
            begin, end};
  for (std::size_t i = begin; i < end; ++i) {
    const auto p = perm_[i];
    node.lat_lo = std::min(node.lat_lo, lat_[p]);
    node.lat_hi = std::max(node.lat_hi, lat_[p]);
    node.lon_lo = std::min(node.lon_lo, lon_[p]);
    node.lon_hi = std::max(node.lon_hi, lon_[p]);
  }
  depth_ = std::max(depth_, level);
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back(node);
  if (end - begin <= leaf_size_) return id;

  // Split the wider axis at the median; ties resolved by index for determinism.
  const bool split_lat = (node.lat_hi - node.lat_lo) >= (node.lon_hi - node.lon_lo);
  const auto& coord = split_lat ? lat_ : lon_;
  const std::size_t mid = begin + (end - begin) / 2;
  std::nth_element(perm_.begin() + static_cast<std::ptrdiff_t>(begin),
                   perm_.begin() + static_cast<std::ptrdiff_t>(mid),
                   perm_.begin() + static_cast<std::ptrdiff_t>(end),
                   [&coord](std::size_t a, std::size_t b) {
                     return coord[a] < coord[b] || (coord[a] == coord[b] && a < b);
                   });
  const int left = build(begin, mid, level + 1);
  const int right = build(mid, end, level + 1);
  nodes_[static_cast<std::size_t>(id)].left = left;
  nodes_[static_cast<std::size_t>(id)].right = right;
  return id;
}

double KdIndex::lower_bound(const Node& n, double qlat, double qlon,
                            CoordinateSystem cs) const noexcept {
  const double dlat = std::max({0.0, n.lat_lo - qlat, qlat - n.lat_hi});
  if (cs == CoordinateSystem::Euclidean) {
    const double dlon = std::max({0.0, n.lon_lo - qlon, qlon - n.lon_hi});
    return std::sqrt(dlat * dlat + dlon * dlon);
  }
  // Great-circle distance is at least the meridional gap; shrink slightly to
  // absorb rounding in the haversine evaluation.
  return dlat * (std::numbers::pi / 180.0) * kEarthRadiusKm * (1.0 - 1e-9);
}

std::vector<Neighbour> KdIndex::knn(const QueryPoint& q, std::size_t k,
                                    CoordinateSystem cs) const {
  if (k == 0) throw std::invalid_argument("knn: k must be >= 1");
  k = std::min(k, size());

  auto cmp = [](const Neighbour& a, const Neighbour& b) { return neighbour_less(a, b); };
  std::priority_queue<Neighbour, std::vector<Neighbour>, decltype(cmp)> best(cmp);

  const double qlat = q.lat();
  const double qlon = q.lon();

  auto visit = [&](auto&& self, int id) -> void {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (best.size() == k && lower_bound(n, qlat, qlon, cs) > best.top().distance) return;
    if (n.left < 0) {
      for (std::size_t i = n.begin; i < n.end; ++i) {
        const auto p = perm_[i];
        const Neighbour cand{p, distance(qlat, qlon, lat_[p], lon_[p], cs)};
        if (best.size() < k) {
          best.push(cand);
        } else if (neighbour_less(cand, best.top())) {
          best.pop();
          best.push(cand);
        }
      }
      return;
    }
    const Node& l = nodes_[static_cast<std::size_t>(n.left)];
    const Node& r = nodes_[static_cast<std::size_t>(n.right)];
    const double bl = lower_bound(l, qlat, qlon, cs);
    const double br = lower_bound(r, qlat, qlon, cs);
    if (bl <= br) {
      self(self, n.left);
      self(self, n.right);
    } else {
      self(self, n.right);
      self(self, n.left);
    }
  };
  visit(visit, 0);

  std::vector<Neighbour> out(best.size());
  for (std::size_t i = out.size(); i > 0; --i) {
    out[i - 1] = best.top();
    best.pop();
  }
  return out;
}

std::vector<Neighbour> knn_brute_force(const ClimatePointCloud& pc, const QueryPoint& q,
                                       std::size_t k, CoordinateSystem cs) {
  if (k == 0) throw std::invalid_argument("knn: k must be >= 1");
  std::vector<Neighbour> all;
  all.reserve(pc.size());
  for (std::size_t i = 0; i < pc.size(); ++i) {
    all.push_back({i, distance(q.lat(), q.lon(), pc[i].lat(), pc[i].lon(), cs)});
  }
  std::sort(all.begin(), all.end(), neighbour_less);
  all.resize(std::min(k, all.size()));
  return all;
}

}  // namespace fieldrecon
