#include "gwer/tree.hpp"

#include <cmath>
#include <ostream>
#include <string>

#include "gwer/error.hpp"

namespace gwer {

TreeArena::TreeArena(const OffspringDist& dist, Measure measure, std::uint64_t node_cap)
    : dist_(&dist), measure_(measure), cap_(node_cap) {
  nodes_.reserve(1024);
  root_ = new_node(kNoNode, 0, measure != Measure::GW);
  ray_top_ = root_;
}

NodeId TreeArena::new_node(NodeId parent, int rho, bool on_ray) {
  if (nodes_.size() >= cap_)
    fail(Errc::ArenaOverflow, "node cap " + std::to_string(cap_) + " reached");
  Node n;
  n.parent = parent;
  n.rho = rho;
  n.on_ray = on_ray;
  nodes_.push_back(n);
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId TreeArena::child(NodeId v, int i) const {
  const Node& n = nodes_[static_cast<std::size_t>(v)];
  if (n.ray_child != kNoNode) return i == 0 ? n.ray_child : n.first_child + (i - 1);
  return n.first_child + i;
}

int TreeArena::draw_count(NodeId v, RngStream& rng) const {
  if (measure_ == Measure::SPINE_Q && nodes_[static_cast<std::size_t>(v)].on_ray)
    return dist_->sample_size_biased(rng);
  return dist_->sample(rng);
}

void TreeArena::expand(NodeId v, RngStream& rng) {
  Node& n = nodes_[static_cast<std::size_t>(v)];
  if (n.expanded) fail(Errc::NotFrontier, "node " + std::to_string(v) + " already expanded");
  int k = draw_count(v, rng);
  int child_rho = n.rho + 1;
  bool spine_here = measure_ == Measure::SPINE_Q && n.on_ray;
  int spine_idx = spine_here ? static_cast<int>(rng.below(static_cast<std::uint64_t>(k))) : -1;
  NodeId first = static_cast<NodeId>(nodes_.size());
  for (int i = 0; i < k; ++i) new_node(v, child_rho, i == spine_idx);
  Node& n2 = nodes_[static_cast<std::size_t>(v)];  // reference may have moved
  n2.first_child = first;
  n2.n_children = k;
  n2.expanded = true;
}

void TreeArena::ensure_children(NodeId v, RngStream& rng) {
  if (!nodes_[static_cast<std::size_t>(v)].expanded) expand(v, rng);
}

NodeId TreeArena::grow_ancestor(RngStream& rng) {
  if (measure_ != Measure::IGW) fail(Errc::DomainError, "ancestor ray exists only under IGW");
  NodeId top = ray_top_;
  int rho_new = nodes_[static_cast<std::size_t>(top)].rho - 1;
  NodeId anc = new_node(kNoNode, rho_new, true);
  int dstar = dist_->sample_size_biased(rng);
  NodeId first = static_cast<NodeId>(nodes_.size());
  for (int i = 0; i < dstar - 1; ++i) new_node(anc, rho_new + 1, false);
  Node& a = nodes_[static_cast<std::size_t>(anc)];
  a.ray_child = top;
  a.first_child = first;
  a.n_children = dstar;
  a.expanded = true;
  nodes_[static_cast<std::size_t>(top)].parent = anc;
  ray_top_ = anc;
  return anc;
}

NodeId TreeArena::parent_or_grow(NodeId v, RngStream& rng) {
  NodeId p = nodes_[static_cast<std::size_t>(v)].parent;
  if (p != kNoNode) return p;
  if (measure_ == Measure::IGW && v == ray_top_) return grow_ancestor(rng);
  return kNoNode;
}

TreeArena TreeArena::sample_gw(const OffspringDist& dist, int depth, RngStream& rng,
                               std::uint64_t cap) {
  if (depth < 0) fail(Errc::DomainError, "depth must be >= 0");
  TreeArena t(dist, Measure::GW, cap);
  // BFS by construction: ids are level-ordered, so one pass suffices.
  for (std::size_t i = 0; i < t.nodes_.size(); ++i) {
    if (t.nodes_[i].rho < depth) t.expand(static_cast<NodeId>(i), rng);
  }
  return t;
}

TreeArena TreeArena::sample_spine_q(const OffspringDist& dist, int depth, RngStream& rng,
                                    std::uint64_t cap) {
  if (depth < 1) fail(Errc::DomainError, "spine depth must be >= 1");
  TreeArena t(dist, Measure::SPINE_Q, cap);
  for (std::size_t i = 0; i < t.nodes_.size(); ++i) {
    if (t.nodes_[i].rho < depth) t.expand(static_cast<NodeId>(i), rng);
  }
  return t;
}

TreeArena TreeArena::sample_igw(const OffspringDist& dist, int ancestor_depth, int subtree_depth,
                                RngStream& rng, std::uint64_t cap) {
  if (ancestor_depth < 0 || subtree_depth < 0) fail(Errc::DomainError, "depths must be >= 0");
  TreeArena t(dist, Measure::IGW, cap);
  // Root subtree.
  std::size_t begin = 0;
  std::size_t end = t.nodes_.size();
  for (int l = 0; l < subtree_depth; ++l) {
    for (std::size_t i = begin; i < end; ++i) t.expand(static_cast<NodeId>(i), rng);
    begin = end;
    end = t.nodes_.size();
  }
  // Ancestors; each off-ray child grows a GW subtree to the same relative depth.
  for (int j = 0; j < ancestor_depth; ++j) {
    NodeId anc = t.grow_ancestor(rng);
    NodeId first = t.nodes_[static_cast<std::size_t>(anc)].first_child;
    int off = t.nodes_[static_cast<std::size_t>(anc)].n_children - 1;
    std::size_t b = static_cast<std::size_t>(first);
    std::size_t e = b + static_cast<std::size_t>(off);
    for (int l = 0; l < subtree_depth; ++l) {
      for (std::size_t i = b; i < e; ++i) t.expand(static_cast<NodeId>(i), rng);
      b = e;
      e = t.nodes_.size();
    }
  }
  return t;
}

double TreeArena::w_estimate(NodeId v, int n) const {
  if (n < 0) fail(Errc::DomainError, "depth must be >= 0");
  // Count descendants of v at relative depth n via a frontier sweep.
  std::vector<NodeId> cur{v};
  std::vector<NodeId> next;
  for (int l = 0; l < n; ++l) {
    next.clear();
    for (NodeId u : cur) {
      const Node& nd = nodes_[static_cast<std::size_t>(u)];
      if (!nd.expanded)
        fail(Errc::InsufficientDepth, "node " + std::to_string(u) + " unexpanded at relative depth " +
                                          std::to_string(l) + " below " + std::to_string(v));
      for (int i = 0; i < nd.n_children; ++i) next.push_back(child(u, i));
    }
    cur.swap(next);
  }
  return static_cast<double>(cur.size()) / std::pow(dist_->mean(), n);
}

double TreeArena::m_estimate(NodeId v, int n) const {
  int level = rho(v);
  if (level > n) fail(Errc::DomainError, "node below level n");
  if (level == n) return 1.0;
  return w_estimate(v, n - level);
}

std::vector<NodeId> TreeArena::nodes_at_rho(int level) const {
  std::vector<NodeId> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].rho == level) out.push_back(static_cast<NodeId>(i));
  return out;
}

void TreeArena::dump(std::ostream& os) const {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    os << i << ' ' << n.parent << ' ' << n.rho << ' ' << (n.on_ray ? 1 : 0) << ' '
       << n.n_children << '\n';
  }
}

}  // namespace gwer
