#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "gwer/offspring.hpp"
#include "gwer/rng.hpp"

namespace gwer {

using NodeId = std::int32_t;
inline constexpr NodeId kNoNode = -1;

enum class Measure { GW, IGW, SPINE_Q };

// Lazily grown rooted tree. Node ids are append-only; a node's block children
// are contiguous, so BFS order guarantees child id > parent id. Ray ancestors
// (IGW) keep their ray child outside the block via ray_child.
//
// rho is the horocycle coordinate: 0 at the original root, +1 per child step,
// negative along the ancestor ray.
class TreeArena {
 public:
  TreeArena(const OffspringDist& dist, Measure measure, std::uint64_t node_cap = kDefaultCap);

  // Eager samplers.
  static TreeArena sample_gw(const OffspringDist& dist, int depth, RngStream& rng,
                             std::uint64_t cap = kDefaultCap);
  // Root subtree to `subtree_depth`; `ancestor_depth` ray ancestors whose
  // off-ray children carry GW subtrees to the same relative depth.
  static TreeArena sample_igw(const OffspringDist& dist, int ancestor_depth, int subtree_depth,
                              RngStream& rng, std::uint64_t cap = kDefaultCap);
  static TreeArena sample_spine_q(const OffspringDist& dist, int depth, RngStream& rng,
                                  std::uint64_t cap = kDefaultCap);

  NodeId root() const { return root_; }
  Measure measure() const { return measure_; }
  const OffspringDist& dist() const { return *dist_; }
  std::size_t node_count() const { return nodes_.size(); }

  bool expanded(NodeId v) const { return nodes_[static_cast<std::size_t>(v)].expanded; }
  bool on_ray(NodeId v) const { return nodes_[static_cast<std::size_t>(v)].on_ray; }
  int rho(NodeId v) const { return nodes_[static_cast<std::size_t>(v)].rho; }
  int degree(NodeId v) const { return nodes_[static_cast<std::size_t>(v)].n_children; }
  NodeId child(NodeId v, int i) const;
  NodeId parent(NodeId v) const { return nodes_[static_cast<std::size_t>(v)].parent; }

  // Draws children for a frontier node (size-biased + uniform spine pick for
  // SPINE_Q ray vertices, ordinary law otherwise). NotFrontier if expanded.
  void expand(NodeId v, RngStream& rng);
  void ensure_children(NodeId v, RngStream& rng);

  // IGW: extends the ancestor ray by one vertex (size-biased degree, fresh
  // off-ray children) and returns it. Call when the walk steps above the
  // current top of the ray.
  NodeId grow_ancestor(RngStream& rng);
  NodeId ray_top() const { return ray_top_; }

  // Parent, growing the ray first if v is the ray top (IGW). kNoNode at a GW
  // root.
  NodeId parent_or_grow(NodeId v, RngStream& rng);

  // Exact W(v, n) = Z_n(v) / m^n on the sampled tree; InsufficientDepth if the
  // subtree below v is not expanded to relative depth n.
  double w_estimate(NodeId v, int n) const;
  // Exact M_n(v) (normalized progeny at absolute level n; M_n(v) = 1 at |v|=n).
  double m_estimate(NodeId v, int n) const;

  std::vector<NodeId> nodes_at_rho(int level) const;

  // "id parent depth on_ray n_children", one line per node.
  void dump(std::ostream& os) const;

  static constexpr std::uint64_t kDefaultCap = 50'000'000;

 private:
  struct Node {
    NodeId parent = kNoNode;
    NodeId first_child = kNoNode;  // contiguous block
    NodeId ray_child = kNoNode;    // ray continuation outside the block (IGW ancestors)
    std::int32_t n_children = 0;
    std::int32_t rho = 0;
    bool on_ray = false;
    bool expanded = false;
  };

  NodeId new_node(NodeId parent, int rho, bool on_ray);
  int draw_count(NodeId v, RngStream& rng) const;

  const OffspringDist* dist_;
  Measure measure_;
  std::uint64_t cap_;
  std::vector<Node> nodes_;
  NodeId root_ = kNoNode;
  NodeId ray_top_ = kNoNode;
};

}  // namespace gwer
