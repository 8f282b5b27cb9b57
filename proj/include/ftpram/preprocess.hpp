#pragma once

// Preprocessing of a faulty machine into the structures the simulation runs
// on: good segments, the list of active blocks, the block tree, the processor
// tree and the memory tree. Every stage runs through machine rounds with the
// exclusive-access discipline, whatever the machine variant.

#include "ftpram/layout.hpp"
#include "ftpram/params.hpp"
#include "ftpram/substrate.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ftpram {

struct GoodSegment {
    SegmentMap map;
    bool contact = false;
    std::uint64_t local_offset = 0;  // virtual units before it in its block
    int capacity = 0;                 // virtual units it stores

    Address first() const { return map.first(); }
    Address last() const { return map.last(); }
};

struct BlockRecord {
    ProcId proc = 0;
    std::vector<GoodSegment> segments;  // contact first, then regular ones
    std::uint64_t capacity = 0;
    std::uint64_t global_offset = 0;
};

struct StageCost {
    std::string name;
    std::uint64_t rounds = 0;
};

/// Per-processor outcome of the segment scan.
struct ScanOutcome {
    ProcId proc = 0;
    bool operational = false;
    std::vector<GoodSegment> segments;
};

struct MemoryMap {
    std::size_t block_size = 0;
    /// Active processors ordered by physical index; position = rank.
    std::vector<ProcId> active;
    std::vector<BlockRecord> blocks;  // by rank
    std::size_t stage1_segments = 0;  // good segments found by operational processors

    std::size_t participants = 0;  // A' = 2^tree_levels
    int tree_levels = 0;
    int r = 0;                     // portion size 2^r
    int depth = 0;                 // memory tree depth = tree_levels + r
    std::uint64_t m_raw = 0;       // virtual units found in all active blocks
    std::uint64_t m_virtual = 0;   // addressable: participants * 2^r

    Word block_tree_root = kNull;      // packed block reference
    Word processor_tree_root = kNull;  // packed record pointer
    Word memory_tree_root = kNull;     // memory-tree node pointer

    /// Exchange partner for ranks >= participants: rank - participants.
    std::vector<std::optional<std::size_t>> partner;

    std::vector<StageCost> stages;
    std::uint64_t rounds() const;
    std::uint64_t rounds_of(const std::string& stage) const;
};

/// Memory-tree node pointers. A leaf points at its storage cell; an internal
/// node is the pair of cells holding its children's pointers.
inline constexpr Word leaf_pointer(Address storage) { return encode_address(storage); }
inline constexpr Word node_pointer(Address left_cell, Address right_cell)
{
    return pack_pair(static_cast<std::uint32_t>(encode_address(left_cell)),
                     static_cast<std::uint32_t>(encode_address(right_cell)));
}
inline constexpr bool is_leaf_pointer(Word w) { return pair_hi(w) == 0; }
inline constexpr Address child_cell(Word node, bool right)
{
    return decode_address(right ? pair_lo(node) : pair_hi(node));
}

/// Processor-tree record pointer: contact address plus record kind.
inline constexpr Word record_pointer(Address contact_first, bool internal)
{
    return pack_pair(static_cast<std::uint32_t>(encode_address(contact_first)), internal ? 1u : 0u);
}

std::size_t block_size(std::size_t n, std::size_t m);

/// Stage 1 alone: every operational processor scans its block for good
/// segments, links them through their role-0 cells, stores local offsets and
/// blanks its operational cells when it finds none. Takes 2*block_size rounds.
std::vector<ScanOutcome> run_segment_scan(FaultyMachine& machine, int alpha, int beta, const SegmentLayout& layout);

/// Stages 1-6. Throws std::runtime_error if no list of active blocks can be
/// formed and ConflictError if any round breaks exclusive access.
MemoryMap preprocess(FaultyMachine& machine, const SimulationParams& params);

/// Flat virtual-address -> storage-cell table derived from the block records
/// (segment order, offsets and capacities), for the first m_virtual addresses.
std::vector<Address> flat_storage_table(const MemoryMap& map);

/// Recomputes every local and global offset as a prefix sum of capacities
/// and reports the ones that differ.
std::vector<std::string> check_offsets(const MemoryMap& map);

/// Partition-tree node [a,b] (1-based processor indices).
struct PartitionNode {
    std::size_t a = 0, b = 0;
    int left = -1, right = -1;
    int depth = 0;
};
/// Internal iff b > a; left [a, floor((a+b-1)/2)], right [ceil((a+b)/2), b].
std::vector<PartitionNode> partition_tree(std::size_t n);

/// Sizes of the consecutive subsets a group of `items` processors is cut into
/// for `checkers` checkers; remainders go to the lowest ranks.
std::vector<std::size_t> subset_sizes(std::size_t items, std::size_t checkers);

std::string memory_map_to_json(const MemoryMap& map);

}  // namespace ftpram
