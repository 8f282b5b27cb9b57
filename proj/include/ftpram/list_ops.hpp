#pragma once

// Link doubling over lists of contact segments, executed through machine
// rounds. Every list member owns the jump-value and jump-link cells of its
// contact segment; in iteration j member q reads the cells of the member 2^j
// positions before it, so every read targets a distinct cell and the scans
// are exclusive-read safe.

#include "ftpram/layout.hpp"
#include "ftpram/substrate.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace ftpram {

struct ListMember {
    ProcId proc = 0;
    SegmentRef self;                    // list reference of the member's contact
    std::optional<SegmentRef> toward;   // neighbour the scan pulls from
};

using ListList = std::vector<std::vector<ListMember>>;
using Combine = std::function<Word(Word earlier, Word later)>;

struct ScanResult {
    /// Inclusive scan value of every member, per list.
    std::vector<std::vector<Word>> inclusive;
    /// The neighbour's inclusive value (absent for the first member).
    std::vector<std::vector<std::optional<Word>>> exclusive;
    /// Where each member's jump link points after the last iteration: the
    /// member 2^iterations positions earlier, if it exists.
    std::vector<std::vector<std::optional<SegmentRef>>> final_link;
    std::uint64_t rounds = 0;
};

/// Inclusive Hillis-Steele scans over several disjoint lists at once. Each
/// list is ordered so that `toward` of member i is member i-1. `iterations`
/// is fixed by the caller (ceil(log2) of the longest possible list) so that
/// all participants stay synchronised; rounds = 2 + 4*iterations, plus one
/// when `with_exclusive` is set.
ScanResult list_scan(FaultyMachine& machine, const ListList& lists, const std::vector<std::vector<Word>>& init,
                     const Combine& combine, int iterations, bool with_exclusive = false);

/// Rank-free broadcast of the first member's value to the whole list.
std::vector<std::vector<Word>> list_broadcast(FaultyMachine& machine, const ListList& lists,
                                              const std::vector<Word>& head_values, int iterations);

/// ceil(log2(x)) for x >= 1.
int ceil_log2(std::uint64_t x);

}  // namespace ftpram
