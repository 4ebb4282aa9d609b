#pragma once

#include <algorithm>
#include <cstdint>
#include <istream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "klex/rng.hpp"

namespace klex {

using ProcessId = std::uint32_t;
/// Local channel label at a process, in [0, degree).
using ChannelLabel = std::uint32_t;

/// Raised for malformed topology descriptions. The message names the offending process.
class TopologyError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Raised when simulator state is structurally corrupt (not a protocol fault).
class StructuralError : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

/// One arrival point on the virtual ring: a token arriving at `process` on `in_channel`.
struct RingPosition {
  ProcessId process = 0;
  ChannelLabel in_channel = 0;

  friend bool operator==(const RingPosition&, const RingPosition&) = default;
};

/// An oriented tree with per-process channel labeling.
///
/// `neighbors(p)[i]` is the process reached over channel label i of p. For every
/// non-root process label 0 is the parent. Immutable once constructed.
class TreeTopology {
public:
  TreeTopology(ProcessId root, std::vector<std::vector<ProcessId>> neighbors)
      : root_(root), neighbors_(std::move(neighbors)) {
    validate();
    build_channel_index();
  }

  std::size_t size() const noexcept { return neighbors_.size(); }
  ProcessId root() const noexcept { return root_; }
  bool is_root(ProcessId p) const noexcept { return p == root_; }

  std::uint32_t degree(ProcessId p) const { return static_cast<std::uint32_t>(neighbors_.at(p).size()); }
  const std::vector<ProcessId>& neighbors(ProcessId p) const { return neighbors_.at(p); }
  ProcessId neighbor(ProcessId p, ChannelLabel label) const { return neighbors_.at(p).at(label); }

  /// Label under which `neighbor(p, label)` knows p.
  ChannelLabel reverse_label(ProcessId p, ChannelLabel label) const { return reverse_.at(p).at(label); }

  /// Number of directed channels, always 2(n-1).
  std::size_t channel_count() const noexcept { return total_channels_; }

  /// Dense index of the directed channel leaving p on `label`.
  std::size_t outgoing_channel(ProcessId p, ChannelLabel label) const {
    check_label(p, label);
    return offset_[p] + label;
  }

  /// Dense index of the directed channel arriving at p on `label`.
  std::size_t incoming_channel(ProcessId p, ChannelLabel label) const {
    check_label(p, label);
    return outgoing_channel(neighbor(p, label), reverse_label(p, label));
  }

  /// Receiving end of a dense channel index.
  RingPosition channel_target(std::size_t channel) const { return targets_.at(channel); }

  /// Sending end of a dense channel index, as (process, outgoing label).
  RingPosition channel_source(std::size_t channel) const { return sources_.at(channel); }

  void check_label(ProcessId p, ChannelLabel label) const {
    if (p >= size() || label >= neighbors_[p].size()) {
      throw StructuralError("channel label " + std::to_string(label) + " out of range at process " +
                            std::to_string(p));
    }
  }

private:
  void validate() {
    const auto n = neighbors_.size();
    if (n < 2) throw TopologyError("a tree needs at least 2 processes");
    if (root_ >= n) throw TopologyError("root " + std::to_string(root_) + " is not a process");
    std::size_t half_edges = 0;
    for (ProcessId p = 0; p < n; ++p) {
      const auto& list = neighbors_[p];
      if (list.empty()) throw TopologyError("process " + std::to_string(p) + " has no neighbors");
      for (std::size_t i = 0; i < list.size(); ++i) {
        const ProcessId q = list[i];
        if (q >= n) throw TopologyError("process " + std::to_string(p) + " names unknown neighbor " + std::to_string(q));
        if (q == p) throw TopologyError("process " + std::to_string(p) + " lists itself as neighbor");
        if (std::count(list.begin(), list.end(), q) != 1) {
          throw TopologyError("process " + std::to_string(p) + " has duplicate edge to " + std::to_string(q));
        }
        const auto& back = neighbors_[q];
        if (std::find(back.begin(), back.end(), p) == back.end()) {
          throw TopologyError("process " + std::to_string(p) + " lists " + std::to_string(q) +
                              " but not vice versa");
        }
      }
      half_edges += list.size();
    }
    if (half_edges != 2 * (n - 1)) throw TopologyError("graph is not a tree: edge count is not n-1");

    // BFS from the root: connectivity plus the parent-is-channel-0 rule.
    std::vector<ProcessId> parent(n, static_cast<ProcessId>(n));
    std::vector<bool> seen(n, false);
    std::vector<ProcessId> queue{root_};
    seen[root_] = true;
    for (std::size_t head = 0; head < queue.size(); ++head) {
      const ProcessId p = queue[head];
      for (ProcessId q : neighbors_[p]) {
        if (seen[q]) continue;
        seen[q] = true;
        parent[q] = p;
        queue.push_back(q);
      }
    }
    if (queue.size() != n) throw TopologyError("graph is not a tree: not connected");
    for (ProcessId p = 0; p < n; ++p) {
      if (p != root_ && neighbors_[p][0] != parent[p]) {
        throw TopologyError("process " + std::to_string(p) + ": channel 0 must be parent (" +
                            std::to_string(parent[p]) + ")");
      }
    }
  }

  void build_channel_index() {
    const auto n = neighbors_.size();
    offset_.resize(n);
    reverse_.resize(n);
    std::size_t next = 0;
    for (ProcessId p = 0; p < n; ++p) {
      offset_[p] = next;
      next += neighbors_[p].size();
      for (ProcessId q : neighbors_[p]) {
        const auto& back = neighbors_[q];
        reverse_[p].push_back(static_cast<ChannelLabel>(std::find(back.begin(), back.end(), p) - back.begin()));
      }
    }
    total_channels_ = next;
    targets_.resize(next);
    sources_.resize(next);
    for (ProcessId p = 0; p < n; ++p) {
      for (ChannelLabel i = 0; i < neighbors_[p].size(); ++i) {
        targets_[offset_[p] + i] = RingPosition{neighbors_[p][i], reverse_[p][i]};
        sources_[offset_[p] + i] = RingPosition{p, i};
      }
    }
  }

  ProcessId root_;
  std::vector<std::vector<ProcessId>> neighbors_;
  std::vector<std::vector<ChannelLabel>> reverse_;
  std::vector<std::size_t> offset_;
  std::vector<RingPosition> targets_;
  std::vector<RingPosition> sources_;
  std::size_t total_channels_ = 0;
};

/// DFS forwarding rule: a token received on `in_channel` leaves on the next label.
inline ChannelLabel next_channel(const TreeTopology& t, ProcessId p, ChannelLabel in_channel) {
  t.check_label(p, in_channel);
  return (in_channel + 1) % t.degree(p);
}

/// Same rule when only the degree is known (used by the per-process handlers).
inline ChannelLabel next_channel(std::uint32_t degree, ChannelLabel in_channel) {
  if (degree == 0 || in_channel >= degree) {
    throw StructuralError("channel label " + std::to_string(in_channel) + " out of range for degree " +
                          std::to_string(degree));
  }
  return (in_channel + 1) % degree;
}

/// The Euler tour followed by every token, starting with the arrival at the root on
/// its last channel. Length is 2(n-1).
inline std::vector<RingPosition> virtual_ring(const TreeTopology& t) {
  std::vector<RingPosition> ring;
  ring.reserve(t.channel_count());
  const RingPosition start{t.root(), t.degree(t.root()) - 1};
  RingPosition at = start;
  do {
    ring.push_back(at);
    const ChannelLabel out = next_channel(t, at.process, at.in_channel);
    at = RingPosition{t.neighbor(at.process, out), t.reverse_label(at.process, out)};
    if (ring.size() > t.channel_count()) throw StructuralError("virtual ring does not close");
  } while (!(at == start));
  return ring;
}

/// Parses `n <count> root <id>` followed by `<id>: <neighbor0> <neighbor1> ...`.
/// Blank lines and `#` comments are ignored.
inline TreeTopology parse_topology(std::istream& in) {
  std::string line;
  std::size_t n = 0;
  ProcessId root = 0;
  bool have_header = false;
  std::vector<std::vector<ProcessId>> neighbors;
  std::vector<bool> defined;
  std::size_t line_no = 0;

  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream fields(line);
    if (!have_header) {
      std::string n_kw, root_kw;
      long long count = -1, root_id = -1;
      if (!(fields >> n_kw >> count >> root_kw >> root_id) || n_kw != "n" || root_kw != "root" || count < 0 ||
          root_id < 0) {
        throw TopologyError("line " + std::to_string(line_no) + ": expected `n <count> root <id>`");
      }
      n = static_cast<std::size_t>(count);
      root = static_cast<ProcessId>(root_id);
      neighbors.assign(n, {});
      defined.assign(n, false);
      have_header = true;
      continue;
    }
    const auto colon = line.find(':');
    if (colon == std::string::npos) {
      throw TopologyError("line " + std::to_string(line_no) + ": expected `<id>: <neighbors...>`");
    }
    long long id = -1;
    std::istringstream id_field(line.substr(0, colon));
    std::string trailing;
    if (!(id_field >> id) || (id_field >> trailing) || id < 0 || static_cast<std::size_t>(id) >= n) {
      throw TopologyError("line " + std::to_string(line_no) + ": bad process id");
    }
    const auto p = static_cast<ProcessId>(id);
    if (defined[p]) throw TopologyError("process " + std::to_string(p) + " defined twice");
    defined[p] = true;
    std::istringstream rest(line.substr(colon + 1));
    std::string token;
    while (rest >> token) {
      std::size_t used = 0;
      long long q = -1;
      try {
        q = std::stoll(token, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != token.size() || q < 0) {
        throw TopologyError("process " + std::to_string(p) + ": bad neighbor `" + token + "`");
      }
      neighbors[p].push_back(static_cast<ProcessId>(q));
    }
  }
  if (!have_header) throw TopologyError("missing `n <count> root <id>` header");
  for (ProcessId p = 0; p < n; ++p) {
    if (!defined[p]) throw TopologyError("process " + std::to_string(p) + " has no neighbor line");
  }
  return TreeTopology(root, std::move(neighbors));
}

inline TreeTopology parse_topology(const std::string& text) {
  std::istringstream in(text);
  return parse_topology(in);
}

inline std::string to_text(const TreeTopology& t) {
  std::ostringstream out;
  out << "n " << t.size() << " root " << t.root() << '\n';
  for (ProcessId p = 0; p < t.size(); ++p) {
    out << p << ':';
    for (ProcessId q : t.neighbors(p)) out << ' ' << q;
    out << '\n';
  }
  return out.str();
}

/// Random oriented tree on n processes: random attachment, random root, random child order.
inline TreeTopology random_tree(Rng& rng, std::size_t n) {
  if (n < 2) throw TopologyError("a tree needs at least 2 processes");
  std::vector<ProcessId> perm(n);
  for (ProcessId i = 0; i < n; ++i) perm[i] = i;
  for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.uniform(0, i)]);

  // Shape over positions 0..n-1 with position 0 as the root, then relabel through perm.
  std::vector<std::vector<ProcessId>> children(n);
  std::vector<ProcessId> parent(n, 0);
  for (std::size_t i = 1; i < n; ++i) {
    parent[i] = static_cast<ProcessId>(rng.uniform(0, i - 1));
    children[parent[i]].push_back(static_cast<ProcessId>(i));
  }
  std::vector<std::vector<ProcessId>> neighbors(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto kids = children[i];
    for (std::size_t j = kids.size(); j > 1; --j) std::swap(kids[j - 1], kids[rng.uniform(0, j - 1)]);
    auto& list = neighbors[perm[i]];
    if (i != 0) list.push_back(perm[parent[i]]);
    for (ProcessId c : kids) list.push_back(perm[c]);
  }
  return TreeTopology(perm[0], std::move(neighbors));
}

}  // namespace klex
