#include "ftpram/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <deque>
#include <map>

namespace ftpram::kernels {

namespace {

// Decides one cell's group of same-round accesses; records sorted by proc.
void judge_group(Variant variant, std::span<const AccessRecord> group, LedgerVerdict& out)
{
    bool any_write = false;
    for (const auto& r : group) any_write |= (r.mode == AccessMode::write);
    bool conflict = false;
    if (group.size() > 1) {
        if (variant == Variant::erew) conflict = true;
        if (variant == Variant::crew && any_write) conflict = true;
    }
    if (conflict) {
        Conflict c{group.front().address, {}};
        for (const auto& r : group) c.procs.push_back(r.proc);
        c.procs.erase(std::unique(c.procs.begin(), c.procs.end()), c.procs.end());
        out.conflicts.push_back(std::move(c));
    }
    for (const auto& r : group) {
        if (r.mode == AccessMode::write) {
            out.commits.emplace_back(r.address, r.value);
            break;
        }
    }
}

bool by_cell_then_proc(const AccessRecord& a, const AccessRecord& b)
{
    return a.address != b.address ? a.address < b.address : a.proc < b.proc;
}

}  // namespace

LedgerVerdict validate_ledger_serial(Variant variant, std::span<const AccessRecord> ledger)
{
    std::map<Address, std::vector<AccessRecord>> groups;
    for (const auto& r : ledger) groups[r.address].push_back(r);
    LedgerVerdict out;
    for (auto& [addr, g] : groups) {
        std::sort(g.begin(), g.end(), by_cell_then_proc);
        judge_group(variant, g, out);
    }
    return out;
}

LedgerVerdict validate_ledger_parallel(Variant variant, std::span<const AccessRecord> ledger)
{
    const int threads = omp_get_max_threads();
    const std::size_t buckets = static_cast<std::size_t>(threads) * 4;
    std::vector<std::vector<AccessRecord>> bucketed(buckets);
    for (const auto& r : ledger) bucketed[r.address % buckets].push_back(r);

    std::vector<LedgerVerdict> partial(buckets);
#pragma omp parallel for schedule(dynamic)
    for (std::size_t b = 0; b < buckets; ++b) {
        auto& recs = bucketed[b];
        std::sort(recs.begin(), recs.end(), by_cell_then_proc);
        std::size_t i = 0;
        while (i < recs.size()) {
            std::size_t j = i;
            while (j < recs.size() && recs[j].address == recs[i].address) ++j;
            judge_group(variant, std::span<const AccessRecord>(recs.data() + i, j - i), partial[b]);
            i = j;
        }
    }

    LedgerVerdict out;
    for (auto& p : partial) {
        std::move(p.conflicts.begin(), p.conflicts.end(), std::back_inserter(out.conflicts));
        out.commits.insert(out.commits.end(), p.commits.begin(), p.commits.end());
    }
    std::sort(out.conflicts.begin(), out.conflicts.end(),
              [](const Conflict& a, const Conflict& b) { return a.cell < b.cell; });
    std::sort(out.commits.begin(), out.commits.end());
    return out;
}

std::vector<SegmentSpan> greedy_segments(std::span<const std::uint8_t> cell_ok, std::size_t alpha, std::size_t beta)
{
    std::vector<SegmentSpan> out;
    std::deque<std::size_t> window;
    for (std::size_t i = 0; i < cell_ok.size(); ++i) {
        if (!cell_ok[i]) continue;
        window.push_back(i);
        while (i - window.front() + 1 > alpha) window.pop_front();
        if (window.size() == beta) {
            out.push_back(SegmentSpan{window.front(), i, {window.begin(), window.end()}});
            window.clear();
        }
    }
    return out;
}

namespace {

Census finish(std::vector<std::uint32_t> per_block, std::span<const std::uint8_t> proc_ok)
{
    Census c;
    for (std::size_t b = 0; b < per_block.size(); ++b) {
        c.good_segments += per_block[b];
        if (per_block[b] > 0 && proc_ok[b]) ++c.active;
    }
    c.segments_per_block = std::move(per_block);
    return c;
}

}  // namespace

Census census_serial(std::span<const std::uint8_t> cell_ok, std::span<const std::uint8_t> proc_ok, std::size_t alpha,
                     std::size_t beta)
{
    const std::size_t n = proc_ok.size();
    const std::size_t block = cell_ok.size() / n;
    std::vector<std::uint32_t> per_block(n);
    for (std::size_t b = 0; b < n; ++b)
        per_block[b] = static_cast<std::uint32_t>(greedy_segments(cell_ok.subspan(b * block, block), alpha, beta).size());
    return finish(std::move(per_block), proc_ok);
}

Census census_parallel(std::span<const std::uint8_t> cell_ok, std::span<const std::uint8_t> proc_ok,
                       std::size_t alpha, std::size_t beta)
{
    const std::size_t n = proc_ok.size();
    const std::size_t block = cell_ok.size() / n;
    std::vector<std::uint32_t> per_block(n);
#pragma omp parallel for schedule(static)
    for (std::size_t b = 0; b < n; ++b) {
        // Counting variant of the greedy scan: a ring of the last beta
        // operational positions replaces the deque.
        std::size_t count = 0, head = 0, size = 0;
        std::vector<std::size_t> ring(beta);
        const auto cells = cell_ok.subspan(b * block, block);
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (!cells[i]) continue;
            ring[(head + size) % beta] = i;
            ++size;
            while (i - ring[head] + 1 > alpha) {
                head = (head + 1) % beta;
                --size;
            }
            if (size == beta) {
                ++count;
                size = 0;
            }
        }
        per_block[b] = static_cast<std::uint32_t>(count);
    }
    return finish(std::move(per_block), proc_ok);
}

}  // namespace ftpram::kernels
