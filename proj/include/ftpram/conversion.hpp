#pragma once

#include <cstddef>
#include <limits>
#include <vector>

namespace ftpram {

inline constexpr std::size_t kNoNode = std::numeric_limits<std::size_t>::max();

/// One attachment made during a phase: `left` and `right` (tree roots, or
/// kNoNode when missing at the end of the list) become children of `node`.
struct Join {
    std::size_t node = kNoNode;
    std::size_t left = kNoNode;
    std::size_t right = kNoNode;
};

/// Result of turning the list 0..L-1 into a search tree. In each phase the
/// list of trees is cut into consecutive quadruples (T1, v1, T2, v2); T1 and
/// T2 become the children of the single node v1 and leave the list. Items at
/// odd positions are always single nodes, so the in-order of the final tree
/// is the list order and its depth is logarithmic in L.
struct ConversionPlan {
    std::size_t root = kNoNode;
    std::vector<std::size_t> left, right, parent;
    std::vector<std::vector<Join>> phases;
    /// The list of tree roots at the start of each phase.
    std::vector<std::vector<std::size_t>> phase_lists;

    std::size_t size() const { return left.size(); }
    /// Edges from the root down to the deepest node.
    int height() const;
    std::vector<std::size_t> in_order() const;
    /// Depth of every node (root = 0).
    std::vector<int> depths() const;
};

ConversionPlan convert_list_to_tree(std::size_t length);

}  // namespace ftpram
