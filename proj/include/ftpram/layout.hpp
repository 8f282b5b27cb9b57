#pragma once

#include "ftpram/substrate.hpp"

#include <array>
#include <initializer_list>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ftpram {

/// Roles of the structural cells of a contact segment, by operational-cell
/// index within the segment. Role 0 of every segment links to the next good
/// segment of the block; in a contact segment it doubles as the marker that
/// makes the block recognisable as active.
enum ContactRole : int {
    c_next_segment = 0,
    c_jump_value,
    c_jump_link,
    c_next_contact,
    c_prev_contact,
    c_offset_capacity,  // (global offset << 32) | block capacity
    c_block_left,
    c_block_right,
    c_temp_root,
    c_block_parent,
    c_memory_root,
    c_ptree_leaf,              // 7 fields, see ProcessorTreeField
    c_ptree_internal = c_ptree_leaf + 7,
    c_org_leaf = c_ptree_internal + 7,  // 6 fields, see OrganizedField
    c_org_internal = c_org_leaf + 6,
    c_contact_role_count = c_org_internal + 6,
};

enum ProcessorTreeField : int { pt_parent = 0, pt_left, pt_right, pt_leftmost, pt_rightmost, pt_path_bits, pt_path_len };
enum OrganizedField : int { org_left = 0, org_right, org_requested, org_path_bits, org_path_len, org_memory_node };

enum RegularRole : int {
    r_next_segment = 0,
    r_local_offset,
    r_temp_left,
    r_temp_right,
    r_regular_role_count,
};

/// Names of the structural roles of both segment kinds plus the number of
/// operational cells one virtual-storage unit takes. In the standard layout a
/// unit is a storage cell followed by a two-cell memory-tree node record.
struct SegmentLayout {
    std::vector<std::string> contact_roles;
    std::vector<std::string> regular_roles;
    int cells_per_virtual = 1;

    static SegmentLayout standard();

    int contact_structural() const { return static_cast<int>(contact_roles.size()); }
    int regular_structural() const { return static_cast<int>(regular_roles.size()); }
    /// Virtual-storage units in a segment of `beta` operational cells.
    int contact_capacity(int beta) const;
    int regular_capacity(int beta) const;
};

/// Stored addresses are offset by one so that a blank (all-zero) cell never
/// looks like a pointer; the all-ones word is the null pointer.
inline constexpr Word kBlank = 0;
inline constexpr Word kNull = ~Word{0};

inline constexpr Word encode_address(Address a) { return a + 1; }
inline constexpr Address decode_address(Word w) { return w - 1; }

/// Role-0 links chain all good segments of active blocks in address order.
/// A link to the contact segment of the next block carries the top bit.
inline constexpr Word kContactFlag = Word{1} << 63;

struct ChainLink {
    bool end = true;
    bool to_contact = false;
    Address target = 0;
};

inline constexpr Word encode_chain(Address target, bool to_contact)
{
    return encode_address(target) | (to_contact ? kContactFlag : 0);
}

inline ChainLink decode_chain(Word w)
{
    if (w == kNull || w == kBlank) return {};
    return ChainLink{false, (w & kContactFlag) != 0, decode_address(w & ~kContactFlag)};
}

/// Reference to a segment: its first cell plus the span offsets of up to four
/// of its role cells, so the holder can reach those cells without rescanning
/// the segment. Packs into one word: low 32 bits = first cell + 1, then four
/// 8-bit deltas. Requires m < 2^32 - 1 and alpha <= 256.
struct SegmentRef {
    Address first = 0;
    std::array<std::uint8_t, 4> delta{};

    Address cell(int slot) const { return first + delta[static_cast<std::size_t>(slot)]; }

    Word pack() const;
    static SegmentRef unpack(Word w);
    bool operator==(const SegmentRef&) const = default;
};

/// Pair of 32-bit payloads in one word; used for two-cell records and for
/// (offset, capacity) cells.
inline constexpr Word pack_pair(std::uint32_t hi, std::uint32_t lo) { return (Word{hi} << 32) | lo; }
inline constexpr std::uint32_t pair_hi(Word w) { return static_cast<std::uint32_t>(w >> 32); }
inline constexpr std::uint32_t pair_lo(Word w) { return static_cast<std::uint32_t>(w & 0xffffffffu); }

/// Slot order of the deltas carried by the three reference kinds.
enum ListSlot : int { ls_jump_value = 0, ls_jump_link, ls_next_contact, ls_prev_contact };
enum BlockSlot : int { bs_offset_capacity = 0, bs_left, bs_right, bs_temp_root };
enum TempSlot : int { ts_local_offset = 0, ts_left, ts_right };

/// Physical layout of one discovered good segment: its operational cells in
/// scan order. Role i lives at cells[i].
struct SegmentMap {
    std::vector<Address> cells;

    Address first() const { return cells.front(); }
    Address last() const { return cells.back(); }
    Address role(int r) const { return cells.at(static_cast<std::size_t>(r)); }

    /// Reference carrying the deltas of up to four chosen roles.
    SegmentRef view(std::initializer_list<int> roles) const;
    SegmentRef list_ref() const;
    SegmentRef block_ref() const;
    SegmentRef temp_ref() const;
};

/// Cells of virtual-storage unit `u` of a segment whose structural part has
/// `structural` cells: storage cell and the node record's two cells.
struct StorageUnit {
    Address storage;
    Address node_left;
    Address node_right;
};
StorageUnit storage_unit(const SegmentMap& seg, int structural, int u);

}  // namespace ftpram
