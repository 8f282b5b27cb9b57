#pragma once

// Organized trees: per access round, the requests of the active processors
// arranged so that every subtree covers a contiguous, sorted run of requested
// virtual addresses and knows the memory-tree node where it splits.

#include "ftpram/substrate.hpp"

#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <vector>

namespace ftpram {

/// Root-to-node path in the memory tree; bit i (from the root) is stored at
/// position length-1-i of `bits`.
struct BinaryPath {
    std::uint64_t bits = 0;
    int length = 0;

    int at(int i) const { return static_cast<int>((bits >> (length - 1 - i)) & 1u); }
    std::string str() const;
    bool operator==(const BinaryPath&) const = default;
};

BinaryPath path_of_address(Address v, int depth);
BinaryPath common_prefix(const BinaryPath& a, const BinaryPath& b);
bool is_prefix(const BinaryPath& a, const BinaryPath& b);  // a prefix of b (or equal)
/// x < y iff x has 0 where they first differ, or x is a proper prefix of y.
bool path_less(const BinaryPath& x, const BinaryPath& y);

struct OrgNode {
    bool leaf = true;
    std::size_t owner = 0;  // active rank holding the record
    Address leftmost = 0, rightmost = 0;
    BinaryPath path;
    int left = -1, right = -1;
    std::size_t request = 0;  // leaves: index of the request
};

struct OrgTree {
    int root = -1;                      // -1: no request (sentinel)
    std::optional<std::size_t> spare;   // rank whose internal record is unused

    bool empty() const { return root < 0; }
};

enum class MergeCase : std::uint8_t { incomparable = 1, equal = 2, prefix = 3 };

/// One recursive step of a merge: its case, the depth it decides at (length
/// of the common prefix of the two roots) and the depths of those roots.
struct MergeCall {
    MergeCase kind;
    int depth;
    int depth_a, depth_b;
    int parent;  // index of the calling step, -1 at the top
};

class OrgArena {
public:
    explicit OrgArena(int depth) : depth_(depth) {}

    int depth() const { return depth_; }
    const OrgNode& node(int i) const { return nodes_.at(static_cast<std::size_t>(i)); }
    std::size_t size() const { return nodes_.size(); }

    OrgTree leaf(std::size_t owner, Address address, std::size_t request);
    /// Empty tree contributed by a processor without a request; its record is the spare.
    OrgTree sentinel(std::size_t owner) { return OrgTree{-1, owner}; }

    /// Merges two organized trees with disjoint addresses. Throws
    /// std::invalid_argument on a repeated address.
    OrgTree merge(const OrgTree& a, const OrgTree& b, std::vector<MergeCall>* log = nullptr);

    /// Leaves in order.
    std::vector<int> leaves(int root) const;

private:
    int make_internal(std::size_t owner, int left, int right);
    int merge_rec(int x, int y, std::deque<std::size_t>& pool, std::vector<MergeCall>* log, int parent);

    int depth_;
    std::vector<OrgNode> nodes_;
};

/// Violations of the organized-tree invariants, found by brute force:
/// sorted distinct leaves, leftmost/rightmost equal subtree min/max, node
/// paths equal to the common prefix of the children, children diverging
/// right below their parent, at most one leaf and one internal record per
/// rank, and the spare's record unused.
std::vector<std::string> check_organized(const OrgArena& arena, const OrgTree& tree);

struct Construction {
    OrgTree tree;
    std::uint64_t critical_path = 0;  // constant-work tasks on the longest chain
    std::uint64_t rounds = 0;         // charged: kTaskRounds per task
    std::size_t merges = 0;
    std::size_t calls[4] = {0, 0, 0, 0};  // by MergeCase
};

inline constexpr std::uint64_t kTaskRounds = 2;

/// Pairwise merging up a perfect processor tree over ranks 0..leaf_count-1
/// (leaf_count a power of two); requests[rank] is the address, if any.
/// Every merge step is a task that waits for its calling step and for the
/// input nodes it touches; the charge is the critical path of that graph.
Construction construct_organized(OrgArena& arena, const std::vector<std::optional<Address>>& requests);

}  // namespace ftpram
