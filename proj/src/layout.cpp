#include "ftpram/layout.hpp"

#include <stdexcept>

namespace ftpram {

SegmentLayout SegmentLayout::standard()
{
    SegmentLayout l;
    l.contact_roles = {"next-segment / active-marker",
                       "jump value",
                       "jump link",
                       "next contact",
                       "prev contact",
                       "global offset | block capacity",
                       "block-tree left",
                       "block-tree right",
                       "temporary-tree root",
                       "block-tree parent",
                       "memory-tree root"};
    for (const char* rec : {"processor-tree leaf", "processor-tree internal"})
        for (const char* f : {"parent", "left", "right", "leftmost", "rightmost", "path bits", "path length"})
            l.contact_roles.push_back(std::string(rec) + " " + f);
    for (const char* rec : {"organized leaf", "organized internal"})
        for (const char* f : {"left", "right", "requested", "path bits", "path length", "memory node"})
            l.contact_roles.push_back(std::string(rec) + " " + f);
    l.regular_roles = {"next-segment", "local offset", "temporary-tree left", "temporary-tree right"};
    l.cells_per_virtual = 3;
    if (l.contact_structural() != c_contact_role_count || l.regular_structural() != r_regular_role_count)
        throw std::logic_error("segment layout table out of sync with role enums");
    return l;
}

int SegmentLayout::contact_capacity(int beta) const
{
    return beta > contact_structural() ? (beta - contact_structural()) / cells_per_virtual : 0;
}

int SegmentLayout::regular_capacity(int beta) const
{
    return beta > regular_structural() ? (beta - regular_structural()) / cells_per_virtual : 0;
}

Word SegmentRef::pack() const
{
    if (first >= 0xffffffffu) throw std::length_error("segment address does not fit a packed reference");
    Word w = encode_address(first);
    for (std::size_t i = 0; i < 4; ++i) w |= Word{delta[i]} << (32 + 8 * i);
    return w;
}

SegmentRef SegmentRef::unpack(Word w)
{
    if (w == kBlank || w == kNull) throw std::invalid_argument("unpacking a blank or null segment reference");
    SegmentRef r;
    r.first = decode_address(w & 0xffffffffu);
    for (std::size_t i = 0; i < 4; ++i) r.delta[i] = static_cast<std::uint8_t>(w >> (32 + 8 * i));
    return r;
}

namespace {

SegmentRef make_ref(const SegmentMap& s, std::initializer_list<int> roles)
{
    SegmentRef r;
    r.first = s.first();
    std::size_t i = 0;
    for (int role : roles) {
        const Address d = s.role(role) - s.first();
        if (d > 255) throw std::length_error("segment span too wide for a packed reference");
        r.delta[i++] = static_cast<std::uint8_t>(d);
    }
    return r;
}

}  // namespace

SegmentRef SegmentMap::view(std::initializer_list<int> roles) const
{
    if (roles.size() > 4) throw std::invalid_argument("a segment reference carries at most four roles");
    return make_ref(*this, roles);
}

SegmentRef SegmentMap::list_ref() const
{
    return make_ref(*this, {c_jump_value, c_jump_link, c_next_contact, c_prev_contact});
}

SegmentRef SegmentMap::block_ref() const
{
    return make_ref(*this, {c_offset_capacity, c_block_left, c_block_right, c_temp_root});
}

SegmentRef SegmentMap::temp_ref() const
{
    return make_ref(*this, {r_local_offset, r_temp_left, r_temp_right});
}

StorageUnit storage_unit(const SegmentMap& seg, int structural, int u)
{
    const std::size_t base = static_cast<std::size_t>(structural + 3 * u);
    return StorageUnit{seg.cells.at(base), seg.cells.at(base + 1), seg.cells.at(base + 2)};
}

}  // namespace ftpram
