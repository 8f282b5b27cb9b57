#pragma once

// Data-parallel kernels with their serial reference versions. The serial
// versions are the ones the machine uses by default; tests check that both
// produce identical results and bench/ compares their throughput.

#include "ftpram/substrate.hpp"

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace ftpram::kernels {

struct LedgerVerdict {
    /// Sorted by cell; processor lists sorted ascending.
    std::vector<Conflict> conflicts;
    /// One (cell, value) per written cell, sorted by cell. The lowest-index
    /// writer wins, which is the CRCW-Priority rule.
    std::vector<std::pair<Address, Word>> commits;
};

LedgerVerdict validate_ledger_serial(Variant variant, std::span<const AccessRecord> ledger);
LedgerVerdict validate_ledger_parallel(Variant variant, std::span<const AccessRecord> ledger);

/// Inclusive-exclusive span of one greedily found good segment, with the
/// positions (relative to the scanned range) of its operational cells.
struct SegmentSpan {
    std::size_t first = 0;
    std::size_t last = 0;
    std::vector<std::size_t> cells;
};

/// Greedy good-segment scan over a run of cells: among cells not assigned to
/// previous segments, whenever `beta` operational cells fall inside a window
/// of at most `alpha` cells they become a segment.
std::vector<SegmentSpan> greedy_segments(std::span<const std::uint8_t> cell_ok, std::size_t alpha,
                                         std::size_t beta);

struct Census {
    std::vector<std::uint32_t> segments_per_block;
    std::size_t active = 0;         // operational processors with >= 1 segment
    std::size_t good_segments = 0;  // over all blocks, operational owner or not
};

/// Counts good segments per block (block i = cells [B*i, B*(i+1)), B = m/n).
Census census_serial(std::span<const std::uint8_t> cell_ok, std::span<const std::uint8_t> proc_ok,
                     std::size_t alpha, std::size_t beta);
Census census_parallel(std::span<const std::uint8_t> cell_ok, std::span<const std::uint8_t> proc_ok,
                       std::size_t alpha, std::size_t beta);

}  // namespace ftpram::kernels
