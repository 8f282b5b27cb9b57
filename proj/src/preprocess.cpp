#include "ftpram/preprocess.hpp"

#include "ftpram/conversion.hpp"
#include "ftpram/kernels.hpp"
#include "ftpram/list_ops.hpp"

#include "json.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <stdexcept>

namespace ftpram {

std::uint64_t MemoryMap::rounds() const
{
    std::uint64_t t = 0;
    for (const auto& s : stages) t += s.rounds;
    return t;
}

std::uint64_t MemoryMap::rounds_of(const std::string& stage) const
{
    for (const auto& s : stages)
        if (s.name == stage) return s.rounds;
    throw std::out_of_range("no preprocessing stage named " + stage);
}

std::size_t block_size(std::size_t n, std::size_t m)
{
    if (n == 0) throw std::invalid_argument("block_size with n = 0");
    return m / n;
}

std::vector<PartitionNode> partition_tree(std::size_t n)
{
    std::vector<PartitionNode> nodes;
    nodes.push_back({1, n, -1, -1, 0});
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const auto [a, b, l, r, d] = nodes[i];
        (void)l;
        (void)r;
        if (b <= a) continue;
        const int li = static_cast<int>(nodes.size());
        nodes.push_back({a, (a + b - 1) / 2, -1, -1, d + 1});
        nodes.push_back({(a + b + 1) / 2, b, -1, -1, d + 1});
        nodes[i].left = li;
        nodes[i].right = li + 1;
    }
    return nodes;
}

std::vector<std::size_t> subset_sizes(std::size_t items, std::size_t checkers)
{
    if (checkers == 0) throw std::invalid_argument("subset_sizes with no checkers");
    std::vector<std::size_t> s(checkers, items / checkers);
    for (std::size_t q = 0; q < items % checkers; ++q) ++s[q];
    return s;
}

namespace {

constexpr Address kNoAccess = ~Address{0};

struct Op {
    Address cell = kNoAccess;  // kNoAccess keeps the processor idle that round
    bool write = false;
    Word value = 0;
};

struct Script {
    ProcId proc = 0;
    std::vector<Op> ops;
};

struct Got {
    bool ok = false;
    Word value = 0;
};

Op rd(Address a) { return Op{a, false, 0}; }
Op wr(Address a, Word v) { return Op{a, true, v}; }

/// Runs scripts in lockstep, op j of every script in round j, then idles up
/// to `min_rounds`. Returns what every op observed.
std::vector<std::vector<Got>> run_scripts(FaultyMachine& machine, const std::vector<Script>& scripts,
                                          std::uint64_t min_rounds = 0)
{
    std::size_t len = 0;
    for (const auto& s : scripts) len = std::max(len, s.ops.size());
    std::vector<std::vector<Got>> got(scripts.size());
    for (std::size_t i = 0; i < scripts.size(); ++i) got[i].resize(scripts[i].ops.size());
    for (std::size_t j = 0; j < len; ++j) {
        for (std::size_t i = 0; i < scripts.size(); ++i) {
            if (j >= scripts[i].ops.size()) continue;
            const Op& op = scripts[i].ops[j];
            if (op.cell == kNoAccess) continue;
            AccessResult r = op.write ? machine.write(scripts[i].proc, op.cell, op.value)
                                      : machine.read(scripts[i].proc, op.cell);
            got[i][j] = Got{r.is_ok(), r.is_ok() ? r.value() : 0};
        }
        machine.end_round();
    }
    if (len < min_rounds) machine.idle(min_rounds - len);
    return got;
}

Word checked(const Got& g, const char* what)
{
    if (!g.ok) throw std::logic_error(std::string("structural cell is faulty: ") + what);
    return g.value;
}

std::optional<SegmentRef> ref_or_null(Word w)
{
    if (w == kNull || w == kBlank) return std::nullopt;
    return SegmentRef::unpack(w);
}

Word pack_or_null(const std::optional<SegmentRef>& r) { return r ? r->pack() : kNull; }

Word first_nonzero(Word earlier, Word later) { return earlier != 0 ? earlier : later; }
Word last_nonzero(Word earlier, Word later) { return later != 0 ? later : earlier; }

}  // namespace

std::vector<ScanOutcome> run_segment_scan(FaultyMachine& machine, int alpha, int beta, const SegmentLayout& layout)
{
    const std::size_t n = machine.n();
    const std::size_t B = block_size(n, machine.m());
    std::vector<ScanOutcome> out(n);
    std::vector<Script> reads;
    for (ProcId p = 1; p <= n; ++p) {
        out[p - 1].proc = p;
        out[p - 1].operational = machine.processor_ok(p);
        if (!out[p - 1].operational) continue;
        Script s{p, {}};
        const Address base = B * (p - 1);
        for (std::size_t j = 0; j < B; ++j) s.ops.push_back(rd(base + j));
        reads.push_back(std::move(s));
    }
    const auto seen = run_scripts(machine, reads, B);

    std::vector<Script> writes;
    for (std::size_t i = 0; i < reads.size(); ++i) {
        const ProcId p = reads[i].proc;
        const Address base = B * (p - 1);
        std::vector<std::uint8_t> ok(B);
        for (std::size_t j = 0; j < B; ++j) ok[j] = seen[i][j].ok;
        const auto spans = kernels::greedy_segments(ok, static_cast<std::size_t>(alpha), static_cast<std::size_t>(beta));
        Script w{p, {}};
        auto& segs = out[p - 1].segments;
        if (spans.empty()) {
            for (std::size_t j = 0; j < B; ++j)
                if (ok[j]) w.ops.push_back(wr(base + j, kBlank));
            writes.push_back(std::move(w));
            continue;
        }
        for (std::size_t j = 0; j < spans.front().first; ++j)
            if (ok[j]) w.ops.push_back(wr(base + j, kBlank));
        std::uint64_t offset = 0;
        for (std::size_t s = 0; s < spans.size(); ++s) {
            GoodSegment g;
            for (std::size_t c : spans[s].cells) g.map.cells.push_back(base + c);
            g.contact = s == 0;
            g.capacity = g.contact ? layout.contact_capacity(beta) : layout.regular_capacity(beta);
            g.local_offset = offset;
            offset += static_cast<std::uint64_t>(g.capacity);
            segs.push_back(std::move(g));
        }
        for (std::size_t s = 0; s < segs.size(); ++s) {
            const Word link = s + 1 < segs.size() ? encode_chain(segs[s + 1].first(), false) : kNull;
            w.ops.push_back(wr(segs[s].map.role(c_next_segment), link));
            if (!segs[s].contact) w.ops.push_back(wr(segs[s].map.role(r_local_offset), segs[s].local_offset));
        }
        writes.push_back(std::move(w));
    }
    run_scripts(machine, writes, B);
    return out;
}

std::vector<Address> flat_storage_table(const MemoryMap& map)
{
    std::vector<Address> table;
    table.reserve(map.m_virtual);
    const int cs = c_contact_role_count;
    const int rs = r_regular_role_count;
    for (const auto& b : map.blocks)
        for (const auto& s : b.segments)
            for (int u = 0; u < s.capacity && table.size() < map.m_virtual; ++u)
                table.push_back(storage_unit(s.map, s.contact ? cs : rs, u).storage);
    return table;
}

std::vector<std::string> check_offsets(const MemoryMap& map)
{
    std::vector<std::string> out;
    std::uint64_t global = 0;
    for (std::size_t r = 0; r < map.blocks.size(); ++r) {
        const auto& b = map.blocks[r];
        if (b.global_offset != global)
            out.push_back("rank " + std::to_string(r) + ": global offset " + std::to_string(b.global_offset) +
                          ", expected " + std::to_string(global));
        std::uint64_t local = 0;
        for (std::size_t i = 0; i < b.segments.size(); ++i) {
            if (b.segments[i].local_offset != local)
                out.push_back("rank " + std::to_string(r) + " segment " + std::to_string(i) + ": local offset " +
                              std::to_string(b.segments[i].local_offset) + ", expected " + std::to_string(local));
            local += static_cast<std::uint64_t>(b.segments[i].capacity);
        }
        if (b.capacity != local)
            out.push_back("rank " + std::to_string(r) + ": capacity " + std::to_string(b.capacity) +
                          ", segments hold " + std::to_string(local));
        global += local;
    }
    return out;
}

namespace {

/// The preprocessing run proper. Per-processor knowledge lives in `Proc`;
/// everything a processor learns about other processors comes from cells it
/// reads. Bookkeeping maps (contact address -> processor) only assemble the
/// per-member views into lists for the doubling helpers.
class Preprocessor {
public:
    Preprocessor(FaultyMachine& machine, const SimulationParams& params)
        : m_(machine), p_(params), layout_(SegmentLayout::standard()), B_(block_size(machine.n(), machine.m()))
    {
        if (params.beta < minimum_beta(layout_))
            throw ParameterError("beta=" + std::to_string(params.beta) + " is below the layout minimum " +
                                 std::to_string(minimum_beta(layout_)));
        if (params.alpha < params.beta) throw ParameterError("alpha>=beta violated");
        if (params.alpha > 256) throw ParameterError("alpha<=256 (packed segment references) violated");
        if (machine.m() >= 0xffffffffu) throw ParameterError("m<2^32-1 (packed addresses) violated");
    }

    MemoryMap run();

private:
    struct Proc {
        ProcId id = 0;
        bool active = false;
        std::vector<GoodSegment> segs;
        std::uint64_t capacity = 0;
        SegmentRef list;  // own contact, list view
        std::optional<SegmentRef> prev, next;
        std::size_t rank = 0, size = 0;

        // block tree
        SegmentRef relink;
        std::optional<SegmentRef> cur_prev, cur_next;
        SegmentRef block;
        std::optional<SegmentRef> left_child, right_child;
        std::uint64_t left_size = 0, right_size = 0, subtree = 0, base = 0, global_offset = 0;

        // processor tree and memory-tree joining
        SegmentRef join;
        std::vector<std::optional<SegmentRef>> back, fwd;  // 2^j positions away

        const GoodSegment& contact() const { return segs.front(); }
    };

    void stage(const std::string& name, std::uint64_t start) { map_.stages.push_back({name, m_.round() - start}); }

    void stage1();
    void stage2();
    void stage3();
    void stage4();
    void stage5();
    void stage6();

    // stage 3 helpers
    struct Find {
        ProcId proc;
        SegmentMap contact;
    };
    void check_part(const std::vector<int>& nodes, bool checker_left, std::size_t smax, int iterations);
    ListList as_lists(const std::vector<std::vector<ProcId>>& lists, bool backward) const;

    Proc& P(ProcId id) { return procs_[id - 1]; }
    Proc& R(std::size_t rank) { return procs_[map_.active[rank] - 1]; }

    FaultyMachine& m_;
    SimulationParams p_;
    SegmentLayout layout_;
    std::size_t B_;
    std::vector<Proc> procs_;
    std::map<Address, ProcId> owner_of_;  // contact first cell -> processor (bookkeeping)
    std::vector<PartitionNode> pt_;
    std::vector<std::uint8_t> busy_, combined_;
    std::vector<std::vector<ProcId>> list_of_;
    MemoryMap map_;
    std::size_t root_rank_ = 0;
    int block_height_ = 0;
};

void Preprocessor::stage1()
{
    const auto start = m_.round();
    const auto scans = run_segment_scan(m_, p_.alpha, p_.beta, layout_);
    procs_.resize(m_.n());
    for (const auto& s : scans) {
        Proc& pr = P(s.proc);
        pr.id = s.proc;
        pr.segs = s.segments;
        pr.active = s.operational && !s.segments.empty();
        map_.stage1_segments += s.segments.size();
        for (const auto& g : pr.segs) pr.capacity += static_cast<std::uint64_t>(g.capacity);
        if (pr.active) {
            pr.list = pr.contact().map.list_ref();
            owner_of_[pr.contact().first()] = pr.id;
        }
    }
    map_.block_size = B_;
    stage("stage1_segments", start);
}

void Preprocessor::stage2()
{
    const auto start = m_.round();
    std::vector<Script> scripts;
    for (auto& pr : procs_) {
        if (!pr.active) continue;
        Script s{pr.id, {}};
        const std::size_t regular = pr.segs.size() - 1;
        const auto& c = pr.contact().map;
        if (regular == 0) {
            s.ops.push_back(wr(c.role(c_temp_root), kNull));
        } else {
            const auto plan = convert_list_to_tree(regular);
            auto ref_of = [&](std::size_t i) {
                return i == kNoNode ? kNull : pr.segs[1 + i].map.temp_ref().pack();
            };
            for (std::size_t i = 0; i < regular; ++i) {
                s.ops.push_back(wr(pr.segs[1 + i].map.role(r_temp_left), ref_of(plan.left[i])));
                s.ops.push_back(wr(pr.segs[1 + i].map.role(r_temp_right), ref_of(plan.right[i])));
            }
            s.ops.push_back(wr(c.role(c_temp_root), ref_of(plan.root)));
        }
        s.ops.push_back(wr(c.role(c_offset_capacity), pack_pair(0, static_cast<std::uint32_t>(pr.capacity))));
        scripts.push_back(std::move(s));
    }
    run_scripts(m_, scripts, 2 * (B_ / static_cast<std::size_t>(p_.beta)) + 2);
    stage("stage2_temporary_trees", start);
}

ListList Preprocessor::as_lists(const std::vector<std::vector<ProcId>>& lists, bool backward) const
{
    ListList out;
    for (const auto& l : lists) {
        std::vector<ListMember> v;
        for (std::size_t i = 0; i < l.size(); ++i) {
            const std::size_t at = backward ? l.size() - 1 - i : i;
            const Proc& pr = procs_[l[at] - 1];
            const auto& toward = backward ? pr.next : pr.prev;
            const bool has = backward ? at + 1 < l.size() : at > 0;
            if (toward.has_value() != has) throw std::logic_error("list member disagrees with its list");
            v.push_back(ListMember{pr.id, pr.list, toward});
        }
        out.push_back(std::move(v));
    }
    return out;
}

void Preprocessor::check_part(const std::vector<int>& nodes, bool checker_left, std::size_t smax, int iterations)
{
    struct Work {
        int checker;
        std::vector<ProcId> targets;
    };
    std::vector<Work> work;
    for (int node : nodes) {
        const int l = pt_[static_cast<std::size_t>(node)].left, r = pt_[static_cast<std::size_t>(node)].right;
        const int cc = checker_left ? l : r, other = checker_left ? r : l;
        if (!busy_[static_cast<std::size_t>(cc)]) continue;
        if (!checker_left && busy_[static_cast<std::size_t>(l)]) continue;
        Work w{cc, {}};
        for (std::size_t i = pt_[static_cast<std::size_t>(other)].a; i <= pt_[static_cast<std::size_t>(other)].b; ++i)
            w.targets.push_back(static_cast<ProcId>(i));
        work.push_back(std::move(w));
        combined_[static_cast<std::size_t>(node)] = 1;
    }

    // Checking: every checker scans the whole block of each assigned processor.
    std::vector<Script> scripts;
    std::vector<std::vector<ProcId>> assigned;
    std::vector<std::pair<std::size_t, std::size_t>> who;  // (work, rank)
    for (std::size_t wi = 0; wi < work.size(); ++wi) {
        const auto& lst = list_of_[static_cast<std::size_t>(work[wi].checker)];
        const auto sizes = subset_sizes(work[wi].targets.size(), lst.size());
        std::size_t next = 0;
        for (std::size_t q = 0; q < lst.size(); ++q) {
            Script s{lst[q], {}};
            std::vector<ProcId> mine;
            for (std::size_t c = 0; c < sizes[q]; ++c, ++next) {
                const ProcId t = work[wi].targets[next];
                mine.push_back(t);
                for (std::size_t j = 0; j < B_; ++j) s.ops.push_back(rd(B_ * (t - 1) + j));
            }
            scripts.push_back(std::move(s));
            assigned.push_back(std::move(mine));
            who.emplace_back(wi, q);
        }
    }
    const auto seen = run_scripts(m_, scripts, smax * B_);

    std::vector<std::vector<std::vector<Find>>> finds(work.size());
    for (std::size_t wi = 0; wi < work.size(); ++wi)
        finds[wi].resize(list_of_[static_cast<std::size_t>(work[wi].checker)].size());
    for (std::size_t si = 0; si < scripts.size(); ++si) {
        auto& mine = finds[who[si].first][who[si].second];
        for (std::size_t c = 0; c < assigned[si].size(); ++c) {
            const ProcId t = assigned[si][c];
            const Got* g = seen[si].data() + c * B_;
            std::size_t j = 0;
            while (j < B_ && !(g[j].ok && g[j].value != kBlank)) ++j;
            if (j == B_) continue;
            SegmentMap cm;
            for (; j < B_ && cm.cells.size() < static_cast<std::size_t>(p_.beta); ++j)
                if (g[j].ok) cm.cells.push_back(B_ * (t - 1) + j);
            if (cm.cells.size() < static_cast<std::size_t>(p_.beta))
                throw std::logic_error("active marker found without a complete contact segment");
            mine.push_back(Find{t, std::move(cm)});
        }
    }

    // Gluing the finds of consecutive checkers through doubling scans.
    std::vector<std::vector<ProcId>> lists;
    for (const auto& w : work) lists.push_back(list_of_[static_cast<std::size_t>(w.checker)]);
    const ListList fwd = as_lists(lists, false), bwd = as_lists(lists, true);
    auto init = [&](bool backward, bool first) {
        std::vector<std::vector<Word>> v(lists.size());
        for (std::size_t l = 0; l < lists.size(); ++l) {
            const std::size_t len = lists[l].size();
            v[l].assign(len, 0);
            for (std::size_t i = 0; i < len; ++i) {
                const auto& f = finds[l][backward ? len - 1 - i : i];
                if (!f.empty()) v[l][i] = (first ? f.front() : f.back()).contact.list_ref().pack();
            }
        }
        return v;
    };
    const auto before = list_scan(m_, fwd, init(false, false), last_nonzero, iterations, true);
    const auto after = list_scan(m_, bwd, init(true, true), last_nonzero, iterations, true);
    std::vector<Word> ends(lists.size(), 0);
    for (std::size_t l = 0; l < lists.size(); ++l) ends[l] = procs_[(checker_left ? lists[l].back() : lists[l].front()) - 1].list.pack();
    ScanResult overall;
    std::vector<std::vector<Word>> end_ref;
    if (checker_left) {
        overall = list_scan(m_, fwd, init(false, true), first_nonzero, iterations);
        end_ref = list_broadcast(m_, bwd, ends, iterations);
    } else {
        overall = list_scan(m_, bwd, init(true, false), first_nonzero, iterations);
        end_ref = list_broadcast(m_, fwd, ends, iterations);
    }

    std::vector<Script> writes;
    for (std::size_t l = 0; l < lists.size(); ++l) {
        const std::size_t len = lists[l].size();
        for (std::size_t q = 0; q < len; ++q) {
            const std::size_t bq = len - 1 - q;
            Script s{lists[l][q], {}};
            const auto& f = finds[l][q];
            if (!f.empty()) {
                const Word b = before.exclusive[l][q].value_or(0);
                const Word a = after.exclusive[l][bq].value_or(0);
                const Word end = checker_left ? end_ref[l][bq] : end_ref[l][q];
                const Word prev0 = b != 0 ? b : (checker_left ? end : kNull);
                const Word nextc = a != 0 ? a : (checker_left ? kNull : end);
                s.ops.push_back(wr(f.front().contact.role(c_prev_contact), prev0));
                for (std::size_t i = 0; i + 1 < f.size(); ++i) {
                    s.ops.push_back(wr(f[i].contact.role(c_next_contact), f[i + 1].contact.list_ref().pack()));
                    s.ops.push_back(wr(f[i + 1].contact.role(c_prev_contact), f[i].contact.list_ref().pack()));
                }
                s.ops.push_back(wr(f.back().contact.role(c_next_contact), nextc));
            }
            const Proc& me = procs_[lists[l][q] - 1];
            if (checker_left && q + 1 == len && overall.inclusive[l][q] != 0)
                s.ops.push_back(wr(me.contact().map.role(c_next_contact), overall.inclusive[l][q]));
            if (!checker_left && q == 0 && overall.inclusive[l][len - 1] != 0)
                s.ops.push_back(wr(me.contact().map.role(c_prev_contact), overall.inclusive[l][len - 1]));
            writes.push_back(std::move(s));
        }
    }
    run_scripts(m_, writes, 2 * smax + 1);
}

void Preprocessor::stage3()
{
    const auto start = m_.round();
    const std::size_t n = m_.n();
    pt_ = partition_tree(n);
    busy_.assign(pt_.size(), 0);
    combined_.assign(pt_.size(), 0);
    list_of_.assign(pt_.size(), {});

    std::vector<Script> init;
    for (auto& pr : procs_) {
        if (!pr.active) continue;
        const auto& c = pr.contact().map;
        init.push_back(Script{pr.id, {wr(c.role(c_next_contact), kNull), wr(c.role(c_prev_contact), kNull)}});
        pr.prev.reset();
        pr.next.reset();
        pr.rank = 0;
        pr.size = 1;
    }
    run_scripts(m_, init, 2);

    int max_depth = 0;
    for (std::size_t i = 0; i < pt_.size(); ++i) {
        max_depth = std::max(max_depth, pt_[i].depth);
        if (pt_[i].left < 0 && P(static_cast<ProcId>(pt_[i].a)).active) {
            busy_[i] = 1;
            list_of_[i] = {static_cast<ProcId>(pt_[i].a)};
        }
    }

    const double g = p_.gamma;
    auto need = [g](std::size_t size) {
        return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(g * static_cast<double>(size) - 1e-9)));
    };
    auto group = [&](int node) { return pt_[static_cast<std::size_t>(node)].b - pt_[static_cast<std::size_t>(node)].a + 1; };

    for (int d = max_depth - 1; d >= 0; --d) {
        std::vector<int> nodes;
        std::size_t s1 = 1, s2 = 1, child_max = 1, group_max = 1;
        for (std::size_t i = 0; i < pt_.size(); ++i) {
            if (pt_[i].depth != d || pt_[i].left < 0) continue;
            nodes.push_back(static_cast<int>(i));
            const std::size_t gl = group(pt_[i].left), gr = group(pt_[i].right);
            s1 = std::max(s1, (gr + need(gl) - 1) / need(gl));
            s2 = std::max(s2, (gl + need(gr) - 1) / need(gr));
            child_max = std::max({child_max, gl, gr});
            group_max = std::max(group_max, gl + gr);
        }
        check_part(nodes, true, s1, ceil_log2(child_max));
        check_part(nodes, false, s2, ceil_log2(child_max));

        // Part three: members of combined lists learn their neighbours, then
        // ranks and the list size by doubling.
        std::vector<Script> polls;
        std::vector<int> formed;
        for (int node : nodes) {
            if (!combined_[static_cast<std::size_t>(node)]) continue;
            formed.push_back(node);
            for (std::size_t i = pt_[static_cast<std::size_t>(node)].a; i <= pt_[static_cast<std::size_t>(node)].b; ++i) {
                const Proc& pr = P(static_cast<ProcId>(i));
                if (!pr.active) continue;
                polls.push_back(Script{pr.id, {rd(pr.contact().map.role(c_next_contact)),
                                               rd(pr.contact().map.role(c_prev_contact))}});
            }
        }
        const auto got = run_scripts(m_, polls, 2);
        for (std::size_t i = 0; i < polls.size(); ++i) {
            Proc& pr = P(polls[i].proc);
            pr.next = ref_or_null(checked(got[i][0], "next contact"));
            pr.prev = ref_or_null(checked(got[i][1], "prev contact"));
        }
        std::vector<std::vector<ProcId>> lists;
        for (int node : formed) {
            const auto& pn = pt_[static_cast<std::size_t>(node)];
            std::vector<ProcId> members;
            for (std::size_t i = pn.a; i <= pn.b; ++i)
                if (P(static_cast<ProcId>(i)).active) members.push_back(static_cast<ProcId>(i));
            std::vector<ProcId> order;
            ProcId cur = 0;
            for (ProcId id : members)
                if (!P(id).prev) {
                    if (cur != 0) throw std::logic_error("combined list has two heads");
                    cur = id;
                }
            while (cur != 0 && order.size() <= members.size()) {
                order.push_back(cur);
                const auto& nx = P(cur).next;
                cur = nx ? owner_of_.at(nx->first) : 0;
            }
            if (order != members) throw std::logic_error("combined list does not follow processor order");
            lists.push_back(std::move(order));
        }
        const int it = ceil_log2(group_max);
        const ListList fwd = as_lists(lists, false), bwd = as_lists(lists, true);
        std::vector<std::vector<Word>> ones(lists.size());
        for (std::size_t l = 0; l < lists.size(); ++l) ones[l].assign(lists[l].size(), 1);
        const auto ranks = list_scan(m_, fwd, ones, [](Word a, Word b) { return a + b; }, it);
        std::vector<Word> tails(lists.size());
        for (std::size_t l = 0; l < lists.size(); ++l) tails[l] = ranks.inclusive[l].back();
        const auto sizes = list_broadcast(m_, bwd, tails, it);
        for (std::size_t l = 0; l < lists.size(); ++l) {
            const std::size_t len = lists[l].size();
            for (std::size_t q = 0; q < len; ++q) {
                Proc& pr = P(lists[l][q]);
                pr.rank = ranks.inclusive[l][q] - 1;
                pr.size = sizes[l][len - 1 - q];
            }
            const std::size_t node = static_cast<std::size_t>(formed[l]);
            busy_[node] = static_cast<double>(len) >= g * static_cast<double>(group(static_cast<int>(node))) - 1e-9;
            list_of_[node] = lists[l];
        }
    }

    if (list_of_[0].empty())
        throw std::runtime_error("no list of active blocks could be formed (" +
                                 std::to_string(std::count_if(procs_.begin(), procs_.end(),
                                                              [](const Proc& pr) { return pr.active; })) +
                                 " active processors)");
    std::size_t actives = 0;
    for (const auto& pr : procs_) actives += pr.active;
    if (list_of_[0].size() != actives) throw std::logic_error("active list misses active processors");
    map_.active = list_of_[0];

    // Chain the last segment of every block to the next block's contact.
    std::vector<Script> chain;
    for (ProcId id : map_.active) {
        Proc& pr = P(id);
        if (pr.next) chain.push_back(Script{id, {wr(pr.segs.back().map.role(c_next_segment), encode_chain(pr.next->first, true))}});
    }
    run_scripts(m_, chain, 1);
    stage("stage3_active_list", start);
}

void Preprocessor::stage4()
{
    const auto start = m_.round();
    const std::size_t A = map_.active.size();
    for (std::size_t q = 0; q < A; ++q) {
        Proc& pr = R(q);
        pr.rank = q;
        pr.size = A;
        const auto& c = pr.contact().map;
        pr.relink = c.view({c_jump_value, c_jump_link, c_memory_root, c_next_contact});
        pr.block = c.block_ref();
    }

    // Neighbours exchange the view through which the relinking cells are
    // reached, then publish current links and the block reference.
    std::vector<Script> ex;
    for (std::size_t q = 0; q < A; ++q) {
        const Proc& pr = R(q);
        Script s{pr.id, {wr(pr.list.cell(ls_jump_value), pr.relink.pack())}};
        s.ops.push_back(pr.prev ? rd(pr.prev->cell(ls_jump_value)) : Op{});
        s.ops.push_back(pr.next ? rd(pr.next->cell(ls_jump_value)) : Op{});
        ex.push_back(std::move(s));
    }
    auto got = run_scripts(m_, ex, 3);
    std::vector<Script> pub;
    for (std::size_t q = 0; q < A; ++q) {
        Proc& pr = R(q);
        pr.cur_prev = pr.prev ? ref_or_null(checked(got[q][1], "relink view")) : std::nullopt;
        pr.cur_next = pr.next ? ref_or_null(checked(got[q][2], "relink view")) : std::nullopt;
        pr.left_child.reset();
        pr.right_child.reset();
        pub.push_back(Script{pr.id,
                             {wr(pr.relink.cell(0), pack_or_null(pr.cur_next)), wr(pr.relink.cell(1), pack_or_null(pr.cur_prev)),
                              wr(pr.relink.cell(2), pr.block.pack()), wr(pr.block.cell(bs_left), kNull),
                              wr(pr.block.cell(bs_right), kNull)}});
    }
    run_scripts(m_, pub, 5);

    // Conversion phases. Each quadruple (T1, v1, T2, v2) relinks through the
    // cells published above; a phase takes eight rounds.
    const auto plan = convert_list_to_tree(A);
    for (const auto& list : plan.phase_lists) {
        std::map<ProcId, std::vector<Op>> ops;
        auto slot = [&](ProcId id, std::size_t j, Op op) {
            auto& v = ops[id];
            v.resize(8);
            if (v[j].cell != kNoAccess) throw std::logic_error("two conversion accesses in one round");
            v[j] = op;
        };
        struct Quad {
            std::size_t t1, v1, t2, v2;
            bool v1_next;  // the next quadruple has a single node v1
        };
        std::vector<Quad> quads;
        for (std::size_t q = 0; q + 1 < list.size(); q += 4)
            quads.push_back(Quad{list[q], list[q + 1], q + 2 < list.size() ? list[q + 2] : kNoNode,
                                 q + 3 < list.size() ? list[q + 3] : kNoNode, q + 5 < list.size()});
        for (const auto& qd : quads) {
            const Proc& v1 = R(qd.v1);
            slot(v1.id, 0, rd(v1.cur_prev->cell(2)));
            if (qd.t2 != kNoNode) slot(v1.id, 1, rd(v1.cur_next->cell(2)));
            slot(v1.id, 2, rd(v1.cur_prev->cell(1)));
            if (qd.t2 != kNoNode) slot(v1.id, 3, rd(v1.cur_next->cell(0)));
            if (qd.v2 != kNoNode) {
                const Proc& v2 = R(qd.v2);
                if (qd.v1_next) slot(v2.id, 2, rd(v2.cur_next->cell(0)));
                slot(v2.id, 3, rd(v2.cur_prev->cell(1)));
            }
        }
        std::vector<Script> reads;
        for (auto& [id, v] : ops) reads.push_back(Script{id, v});
        const auto seen = run_scripts(m_, reads, 4);
        std::map<ProcId, const std::vector<Got>*> seen_by;
        for (std::size_t i = 0; i < reads.size(); ++i) seen_by[reads[i].proc] = &seen[i];

        ops.clear();
        for (const auto& qd : quads) {
            Proc& v1 = R(qd.v1);
            const auto& g1 = *seen_by.at(v1.id);
            v1.left_child = SegmentRef::unpack(checked(g1[0], "block reference"));
            v1.right_child = qd.t2 != kNoNode ? std::optional<SegmentRef>(SegmentRef::unpack(checked(g1[1], "block reference")))
                                              : std::nullopt;
            const auto new_prev = ref_or_null(checked(g1[2], "current prev"));
            const auto new_next = qd.t2 != kNoNode ? ref_or_null(checked(g1[3], "current next")) : std::nullopt;
            slot(v1.id, 4, wr(v1.block.cell(bs_left), v1.left_child->pack()));
            slot(v1.id, 5, wr(v1.block.cell(bs_right), pack_or_null(v1.right_child)));
            slot(v1.id, 6, wr(v1.relink.cell(0), pack_or_null(new_next)));
            slot(v1.id, 7, wr(v1.relink.cell(1), pack_or_null(new_prev)));
            v1.cur_prev = new_prev;
            v1.cur_next = new_next;
            if (qd.v2 != kNoNode) {
                Proc& v2 = R(qd.v2);
                const auto& g2 = *seen_by.at(v2.id);
                v2.cur_prev = ref_or_null(checked(g2[3], "current prev"));
                slot(v2.id, 6, wr(v2.relink.cell(1), pack_or_null(v2.cur_prev)));
                if (qd.v1_next) {
                    v2.cur_next = ref_or_null(checked(g2[2], "current next"));
                    slot(v2.id, 7, wr(v2.relink.cell(0), pack_or_null(v2.cur_next)));
                }
            }
        }
        std::vector<Script> writes;
        for (auto& [id, v] : ops) writes.push_back(Script{id, v});
        run_scripts(m_, writes, 4);
    }
    for (std::size_t q = 0; q < A; ++q) {
        const Proc& pr = R(q);
        auto same = [&](const std::optional<SegmentRef>& r, std::size_t child) {
            return child == kNoNode ? !r : (r && r->first == R(child).block.first);
        };
        if (!same(pr.left_child, plan.left[q]) || !same(pr.right_child, plan.right[q]))
            throw std::logic_error("block tree relinking diverged from the conversion plan");
    }

    // Up-sweep: subtree capacities, deepest level first.
    const auto depth = plan.depths();
    const int H = plan.height();
    for (int d = H; d >= 0; --d) {
        std::vector<Script> rs;
        for (std::size_t q = 0; q < A; ++q) {
            if (depth[q] != d) continue;
            const Proc& pr = R(q);
            rs.push_back(Script{pr.id, {pr.left_child ? rd(pr.left_child->cell(bs_offset_capacity)) : Op{},
                                        pr.right_child ? rd(pr.right_child->cell(bs_offset_capacity)) : Op{}}});
        }
        const auto seen = run_scripts(m_, rs, 2);
        std::vector<Script> ws;
        for (std::size_t i = 0; i < rs.size(); ++i) {
            Proc& pr = P(rs[i].proc);
            pr.left_size = pr.left_child ? pair_lo(checked(seen[i][0], "subtree size")) : 0;
            pr.right_size = pr.right_child ? pair_lo(checked(seen[i][1], "subtree size")) : 0;
            pr.subtree = pr.capacity + pr.left_size + pr.right_size;
            ws.push_back(Script{pr.id, {wr(pr.block.cell(bs_offset_capacity), pack_pair(0, static_cast<std::uint32_t>(pr.subtree)))}});
        }
        run_scripts(m_, ws, 1);
    }

    // Down-sweep: a parent hands each child the base offset of its subtree.
    R(plan.root).base = 0;
    for (int d = 0; d <= H; ++d) {
        std::vector<Script> rs;
        if (d > 0)
            for (std::size_t q = 0; q < A; ++q)
                if (depth[q] == d) rs.push_back(Script{R(q).id, {rd(R(q).block.cell(bs_offset_capacity))}});
        const auto seen = run_scripts(m_, rs, 1);
        for (std::size_t i = 0; i < rs.size(); ++i) P(rs[i].proc).base = pair_hi(checked(seen[i][0], "subtree base"));
        std::vector<Script> ws;
        for (std::size_t q = 0; q < A; ++q) {
            if (depth[q] != d) continue;
            Proc& pr = R(q);
            pr.global_offset = pr.base + pr.left_size;
            Script s{pr.id, {}};
            s.ops.push_back(pr.left_child ? wr(pr.left_child->cell(bs_offset_capacity),
                                               pack_pair(static_cast<std::uint32_t>(pr.base), static_cast<std::uint32_t>(pr.left_size)))
                                          : Op{});
            s.ops.push_back(pr.right_child ? wr(pr.right_child->cell(bs_offset_capacity),
                                                pack_pair(static_cast<std::uint32_t>(pr.global_offset + pr.capacity),
                                                          static_cast<std::uint32_t>(pr.right_size)))
                                           : Op{});
            ws.push_back(std::move(s));
        }
        run_scripts(m_, ws, 2);
    }
    std::vector<Script> fin;
    for (std::size_t q = 0; q < A; ++q) {
        const Proc& pr = R(q);
        fin.push_back(Script{pr.id, {wr(pr.block.cell(bs_offset_capacity),
                                        pack_pair(static_cast<std::uint32_t>(pr.global_offset), static_cast<std::uint32_t>(pr.capacity)))}});
    }
    run_scripts(m_, fin, 1);
    map_.block_tree_root = R(plan.root).block.pack();
    root_rank_ = plan.root;
    block_height_ = H;
    stage("stage4_block_tree", start);
}

void Preprocessor::stage5()
{
    const auto start = m_.round();
    const std::size_t A = map_.active.size();
    const std::size_t Ap = std::bit_floor(A);
    const int k = std::countr_zero(Ap);
    map_.participants = Ap;
    map_.tree_levels = k;

    for (std::size_t q = 0; q < Ap; ++q) {
        Proc& pr = R(q);
        pr.join = pr.contact().map.view({c_jump_value, c_jump_link, c_org_leaf + int{org_left}, c_org_leaf + int{org_right}});
        pr.back.assign(static_cast<std::size_t>(std::max(k, 1)), std::nullopt);
        pr.fwd.assign(static_cast<std::size_t>(std::max(k, 1)), std::nullopt);
    }
    std::vector<Script> ex;
    for (std::size_t q = 0; q < Ap; ++q) {
        const Proc& pr = R(q);
        Script s{pr.id, {wr(pr.list.cell(ls_jump_value), pr.join.pack())}};
        s.ops.push_back(q > 0 ? rd(pr.prev->cell(ls_jump_value)) : Op{});
        s.ops.push_back(q + 1 < Ap ? rd(pr.next->cell(ls_jump_value)) : Op{});
        ex.push_back(std::move(s));
    }
    auto got = run_scripts(m_, ex, 3);
    for (std::size_t q = 0; q < Ap; ++q) {
        Proc& pr = R(q);
        if (q > 0) pr.back[0] = SegmentRef::unpack(checked(got[q][1], "join view"));
        if (q + 1 < Ap) pr.fwd[0] = SegmentRef::unpack(checked(got[q][2], "join view"));
    }
    // Doubling: links to the members 2^j positions away in both directions.
    for (int j = 1; j < k; ++j) {
        const std::size_t jj = static_cast<std::size_t>(j);
        std::vector<Script> ds;
        for (std::size_t q = 0; q < Ap; ++q) {
            const Proc& pr = R(q);
            ds.push_back(Script{pr.id,
                                {wr(pr.join.cell(0), pack_or_null(pr.fwd[jj - 1])), wr(pr.join.cell(1), pack_or_null(pr.back[jj - 1])),
                                 pr.back[jj - 1] ? rd(pr.back[jj - 1]->cell(1)) : Op{},
                                 pr.fwd[jj - 1] ? rd(pr.fwd[jj - 1]->cell(0)) : Op{}}});
        }
        got = run_scripts(m_, ds, 4);
        for (std::size_t q = 0; q < Ap; ++q) {
            Proc& pr = R(q);
            if (pr.back[jj - 1]) pr.back[jj] = ref_or_null(checked(got[q][2], "back link"));
            if (pr.fwd[jj - 1]) pr.fwd[jj] = ref_or_null(checked(got[q][3], "forward link"));
        }
    }

    auto field = [&](const Proc& pr, bool internal, int f) {
        return pr.contact().map.role((internal ? c_ptree_internal : c_ptree_leaf) + f);
    };
    std::vector<Script> init;
    for (std::size_t q = 0; q < Ap; ++q) {
        const Proc& pr = R(q);
        init.push_back(Script{pr.id,
                              {wr(field(pr, false, pt_parent), kNull), wr(field(pr, false, pt_leftmost), encode_address(q)),
                               wr(field(pr, false, pt_rightmost), encode_address(q)), wr(field(pr, true, pt_parent), kNull),
                               wr(field(pr, true, pt_left), kNull), wr(field(pr, true, pt_right), kNull)}});
    }
    run_scripts(m_, init, 6);

    // Phase j pairs trees of 2^(j-1) leaves; the spare internal record of the
    // left tree's last processor becomes the new root.
    for (int j = 1; j <= k; ++j) {
        std::map<ProcId, std::vector<Op>> ops;
        auto slot = [&](ProcId id, std::size_t at, Op op) {
            auto& v = ops[id];
            v.resize(6);
            if (v[at].cell != kNoAccess) throw std::logic_error("two processor-tree accesses in one round");
            v[at] = op;
        };
        const std::size_t span = std::size_t{1} << j, half = span / 2;
        for (std::size_t a = 0; a < Ap; a += span) {
            const std::size_t h1 = a + half - 1;
            Proc& top = R(h1);
            const Word self_internal = record_pointer(top.contact().first(), true);
            Word lptr, rptr;
            std::size_t lc, rc;
            if (j == 1) {
                lptr = record_pointer(top.contact().first(), false);
                rptr = record_pointer(top.fwd[0]->first, false);
                lc = h1;
                rc = h1 + 1;
            } else {
                const std::size_t back = static_cast<std::size_t>(j - 2);
                lptr = record_pointer(top.back[back]->first, true);
                rptr = record_pointer(top.fwd[back]->first, true);
                lc = h1 - (half / 2);
                rc = h1 + (half / 2);
            }
            slot(top.id, 0, wr(field(top, true, pt_left), lptr));
            slot(top.id, 1, wr(field(top, true, pt_right), rptr));
            slot(top.id, 2, wr(field(top, true, pt_leftmost), encode_address(a)));
            slot(top.id, 3, wr(field(top, true, pt_rightmost), encode_address(a + span - 1)));
            slot(R(lc).id, 4, wr(field(R(lc), j > 1, pt_parent), self_internal));
            slot(R(rc).id, 5, wr(field(R(rc), j > 1, pt_parent), self_internal));
        }
        std::vector<Script> ws;
        for (auto& [id, v] : ops) ws.push_back(Script{id, v});
        run_scripts(m_, ws, 6);
    }
    map_.processor_tree_root = k == 0 ? record_pointer(R(0).contact().first(), false)
                                      : record_pointer(R(Ap / 2 - 1).contact().first(), true);

    // Ranks beyond the participants pair with rank - 2^k for the exchange of
    // access requests; the jump link after k doubling iterations points there.
    map_.partner.assign(A, std::nullopt);
    std::vector<std::vector<ProcId>> all{map_.active};
    std::vector<std::vector<Word>> zeros{std::vector<Word>(A, 0)};
    const auto jumped = list_scan(m_, as_lists(all, false), zeros, first_nonzero, k);
    for (std::size_t q = Ap; q < A; ++q) {
        const auto& link = jumped.final_link[0][q];
        if (!link) throw std::logic_error("missing exchange partner");
        map_.partner[q] = P(owner_of_.at(link->first)).rank;
    }
    stage("stage5_processor_tree", start);
}

void Preprocessor::stage6()
{
    const auto start = m_.round();
    const std::size_t A = map_.active.size();
    const std::size_t Ap = map_.participants;
    const int k = map_.tree_levels;
    const int it_all = ceil_log2(A);
    const int it_part = ceil_log2(Ap);
    std::vector<std::vector<ProcId>> all{map_.active};
    const ListList all_fwd = as_lists(all, false), all_bwd = as_lists(all, true);

    // Total virtual units, known to the tail, and the block-tree root, known
    // to its owner, reach everybody who needs them.
    const Proc& tail = R(A - 1);
    const auto m_raw = list_broadcast(m_, all_bwd, {tail.global_offset + tail.capacity}, it_all);
    std::vector<std::vector<Word>> root_init{std::vector<Word>(A, 0)};
    root_init[0][A - 1 - root_rank_] = R(root_rank_).block.pack();
    const auto root_seen = list_scan(m_, all_bwd, root_init, first_nonzero, it_all);
    map_.m_raw = m_raw[0][A - 1];
    if (map_.m_raw < Ap) throw std::logic_error("fewer virtual units than participants");
    const int r = static_cast<int>(std::bit_width(map_.m_raw / Ap)) - 1;
    const std::uint64_t portion = std::uint64_t{1} << r;
    map_.r = r;
    map_.depth = k + r;
    map_.m_virtual = static_cast<std::uint64_t>(Ap) << r;

    const int ccap = layout_.contact_capacity(p_.beta);
    const int rcap = layout_.regular_capacity(p_.beta);

    // Traveling lists. Participant i looks for virtual address i * 2^r.
    struct Traveler {
        bool landed = false;
        bool cut = false;      // no predecessor in its list
        bool in_temp = false;  // descending a temporary tree
        SegmentRef node;       // meaningful at list heads
        std::uint64_t block_offset = 0;
        Address seg_first = 0;
        bool seg_contact = false;
        std::uint64_t seg_base = 0;
    };
    std::vector<Traveler> tv(Ap);
    tv[0].cut = true;
    tv[0].node = SegmentRef::unpack(root_seen.inclusive[0][A - 1]);
    auto target = [&](std::size_t i) { return static_cast<std::uint64_t>(i) * portion; };

    auto lists_now = [&](bool temp) {
        std::vector<std::vector<std::size_t>> ls;
        for (std::size_t i = 0; i < Ap; ++i) {
            if (tv[i].landed || tv[i].in_temp != temp) continue;
            if (tv[i].cut || ls.empty()) ls.emplace_back();
            ls.back().push_back(i);
        }
        return ls;
    };
    auto to_list_list = [&](const std::vector<std::vector<std::size_t>>& ls) {
        ListList out;
        for (const auto& l : ls) {
            std::vector<ListMember> v;
            for (std::size_t x = 0; x < l.size(); ++x) {
                const Proc& pr = R(l[x]);
                v.push_back(ListMember{pr.id, pr.list, x > 0 ? pr.prev : std::nullopt});
            }
            out.push_back(std::move(v));
        }
        return out;
    };

    auto level = [&](bool temp) {
        const auto ls = lists_now(temp);
        std::vector<Script> heads;
        for (const auto& l : ls)
            heads.push_back(Script{R(l.front()).id, {rd(tv[l.front()].node.cell(temp ? int{ts_local_offset} : int{bs_offset_capacity}))}});
        const auto seen = run_scripts(m_, heads, 1);
        std::vector<Word> v1(ls.size()), v2(ls.size());
        for (std::size_t l = 0; l < ls.size(); ++l) {
            v1[l] = checked(seen[l][0], temp ? "local offset" : "global offset");
            v2[l] = tv[ls[l].front()].node.pack();
        }
        const ListList lists = to_list_list(ls);
        const auto b1 = list_broadcast(m_, lists, v1, it_part);
        const auto b2 = list_broadcast(m_, lists, v2, it_part);

        // 0: left, 1: lands here, 2: into the temporary tree, 3: right
        std::vector<Script> descend;
        for (std::size_t l = 0; l < ls.size(); ++l) {
            for (std::size_t x = 0; x < ls[l].size(); ++x) {
                const std::size_t i = ls[l][x];
                Traveler& t = tv[i];
                const SegmentRef node = SegmentRef::unpack(b2[l][x]);
                auto classify = [&](std::uint64_t a) {
                    if (!temp) {
                        const std::uint64_t off = pair_hi(b1[l][x]), cap = pair_lo(b1[l][x]);
                        if (a < off) return 0;
                        if (a < off + static_cast<std::uint64_t>(ccap)) return 1;
                        if (a < off + cap) return 2;
                        return 3;
                    }
                    const std::uint64_t base = t.block_offset + b1[l][x];
                    if (a < base) return 0;
                    if (a < base + static_cast<std::uint64_t>(rcap)) return 1;
                    return 3;
                };
                const int c = classify(target(i));
                if (x > 0 && classify(target(i - 1)) != c) t.cut = true;
                const bool head = x == 0 || t.cut;
                if (c == 1) {
                    t.landed = true;
                    t.seg_first = node.first;
                    t.seg_contact = !temp;
                    t.seg_base = temp ? t.block_offset + b1[l][x] : pair_hi(b1[l][x]);
                    continue;
                }
                if (c == 2) {
                    t.in_temp = true;
                    t.block_offset = pair_hi(b1[l][x]);
                }
                if (!head) continue;
                int slot = 0;
                if (temp) slot = c == 0 ? ts_left : ts_right;
                else slot = c == 0 ? bs_left : (c == 2 ? bs_temp_root : bs_right);
                descend.push_back(Script{R(i).id, {rd(node.cell(slot))}});
            }
        }
        const auto down = run_scripts(m_, descend, 1);
        for (std::size_t h = 0; h < descend.size(); ++h) {
            const std::size_t i = P(descend[h].proc).rank;
            const Word w = checked(down[h][0], "tree link");
            if (w == kNull || w == kBlank) throw std::logic_error("traveling list fell off a tree");
            tv[i].node = SegmentRef::unpack(w);
        }
    };
    for (int d = 0; d <= block_height_; ++d) level(false);
    const std::size_t max_regular = B_ / static_cast<std::size_t>(p_.beta);
    const int temp_height = max_regular == 0 ? -1 : convert_list_to_tree(max_regular).height();
    for (int d = 0; d <= temp_height; ++d) level(true);
    for (std::size_t i = 0; i < Ap; ++i)
        if (!tv[i].landed) throw std::logic_error("traveling list did not reach its segment");

    // Portions: participant i arranges units [i*2^r, (i+1)*2^r) into a
    // complete search tree, walking the segment chain from where it landed.
    // Participants that may share a segment work in different sub-phases.
    struct Walker {
        Address first = 0;
        bool contact = false;
        std::uint64_t base = 0;
        std::size_t scanned = 0;
        SegmentMap seg;
        bool reading_link = false;
        bool writing = false;
        std::vector<StorageUnit> units;
        std::vector<std::pair<Address, Word>> writes;
        std::size_t written = 0;
        Word root = 0, spare = 0;
    };
    std::vector<Walker> wk(Ap);
    for (std::size_t i = 0; i < Ap; ++i) {
        wk[i].first = tv[i].seg_first;
        wk[i].contact = tv[i].seg_contact;
        wk[i].base = tv[i].seg_base;
        wk[i].units.resize(portion);
    }
    const int min_cap = std::min(ccap, rcap > 0 ? rcap : ccap);
    const int max_cap = std::max(ccap, rcap);
    const std::uint64_t segs_per_portion = (portion + static_cast<std::uint64_t>(min_cap) - 1) / static_cast<std::uint64_t>(min_cap) + 1;
    const std::uint64_t walk_rounds = segs_per_portion * (static_cast<std::uint64_t>(p_.alpha) + 1) + 2 * portion;
    const std::size_t subphases = (static_cast<std::size_t>(max_cap) + portion - 1) / portion + 1;

    auto finish_reading = [&](std::size_t i) {
        Walker& w = wk[i];
        w.writing = true;
        const auto& u = w.units;
        for (std::uint64_t j = 1; j < portion; ++j) {
            const std::uint64_t half = std::uint64_t{1} << std::countr_zero(j);
            const Word l = half == 1 ? leaf_pointer(u[j - 1].storage)
                                     : node_pointer(u[j - half / 2].node_left, u[j - half / 2].node_right);
            const Word rr = half == 1 ? leaf_pointer(u[j].storage)
                                      : node_pointer(u[j + half / 2].node_left, u[j + half / 2].node_right);
            w.writes.emplace_back(u[j].node_left, l);
            w.writes.emplace_back(u[j].node_right, rr);
        }
        w.root = portion == 1 ? leaf_pointer(u[0].storage)
                              : node_pointer(u[portion / 2].node_left, u[portion / 2].node_right);
        w.spare = node_pointer(u[0].node_left, u[0].node_right);
    };

    for (std::size_t ph = 0; ph < subphases; ++ph) {
        std::vector<std::size_t> who;
        std::vector<ProcId> ids;
        for (std::size_t i = ph; i < Ap; i += subphases) {
            who.push_back(i);
            ids.push_back(R(i).id);
        }
        run_lockstep(
            m_, ids,
            [&](std::size_t x, std::uint64_t) {
                const std::size_t i = who[x];
                Walker& w = wk[i];
                const ProcId id = ids[x];
                const std::uint64_t lo = target(i), hi = lo + portion;
                if (w.writing) {
                    if (w.written == w.writes.size()) return false;
                    m_.write(id, w.writes[w.written].first, w.writes[w.written].second);
                    ++w.written;
                    return true;
                }
                if (w.reading_link) {
                    const auto res = m_.read(id, w.seg.role(c_next_segment));
                    if (res.is_fault()) throw std::logic_error("segment link cell is faulty");
                    const ChainLink link = decode_chain(res.value());
                    if (link.end) throw std::logic_error("segment chain ended inside a portion");
                    w.base += static_cast<std::uint64_t>(w.contact ? ccap : rcap);
                    w.first = link.target;
                    w.contact = link.to_contact;
                    w.seg.cells.clear();
                    w.scanned = 0;
                    w.reading_link = false;
                    return true;
                }
                const auto res = m_.read(id, w.first + w.scanned);
                ++w.scanned;
                if (res.is_ok()) w.seg.cells.push_back(w.first + w.scanned - 1);
                if (w.seg.cells.size() == static_cast<std::size_t>(p_.beta)) {
                    const int cap = w.contact ? ccap : rcap;
                    const int structural = w.contact ? int{c_contact_role_count} : int{r_regular_role_count};
                    for (int u = 0; u < cap; ++u) {
                        const std::uint64_t a = w.base + static_cast<std::uint64_t>(u);
                        if (a >= lo && a < hi) w.units[a - lo] = storage_unit(w.seg, structural, u);
                    }
                    if (w.base + static_cast<std::uint64_t>(cap) >= hi) finish_reading(i);
                    else w.reading_link = true;
                } else if (w.scanned > static_cast<std::size_t>(p_.alpha)) {
                    throw std::logic_error("segment wider than alpha");
                }
                return true;
            },
            walk_rounds);
    }

    // Joining portion trees pairwise, k phases; the spare record of the
    // left tree's last portion becomes the new root.
    std::vector<Script> pub;
    std::vector<Word> root_of(Ap);
    for (std::size_t i = 0; i < Ap; ++i) {
        const Proc& pr = R(i);
        root_of[i] = wk[i].root;
        pub.push_back(Script{pr.id, {wr(pr.join.cell(2), wk[i].root), wr(pr.join.cell(3), wk[i].spare)}});
    }
    run_scripts(m_, pub, 2);
    for (int j = 1; j <= k; ++j) {
        const std::size_t span = std::size_t{1} << j, half = span / 2, jj = static_cast<std::size_t>(j - 1);
        std::vector<Script> rs;
        std::vector<std::pair<std::size_t, std::size_t>> pairs;
        for (std::size_t a = 0; a < Ap; a += span) {
            const std::size_t h1 = a + half - 1, h2 = a + span - 1;
            pairs.emplace_back(h1, h2);
            rs.push_back(Script{R(h1).id, {rd(R(h1).fwd[jj]->cell(2))}});
            rs.push_back(Script{R(h2).id, {rd(R(h2).back[jj]->cell(3))}});
        }
        const auto seen = run_scripts(m_, rs, 1);
        std::vector<Script> ws;
        for (std::size_t x = 0; x < pairs.size(); ++x) {
            const auto [h1, h2] = pairs[x];
            const Word right_root = checked(seen[2 * x][0], "portion root");
            const Word new_root = checked(seen[2 * x + 1][0], "spare record");
            const Walker& w1 = wk[h1];
            ws.push_back(Script{R(h1).id, {wr(w1.units[0].node_left, root_of[h1]), wr(w1.units[0].node_right, right_root)}});
            ws.push_back(Script{R(h2).id, {wr(R(h2).join.cell(2), new_root)}});
            root_of[h2] = new_root;
        }
        run_scripts(m_, ws, 2);
    }

    // The final root is known to the last participant; spread it to all.
    std::vector<std::vector<Word>> fwd_init{std::vector<Word>(A, 0)}, bwd_init{std::vector<Word>(A, 0)};
    fwd_init[0][Ap - 1] = root_of[Ap - 1];
    bwd_init[0][A - Ap] = root_of[Ap - 1];
    const auto f = list_scan(m_, all_fwd, fwd_init, first_nonzero, it_all);
    const auto b = list_scan(m_, all_bwd, bwd_init, first_nonzero, it_all);
    std::vector<Script> fin;
    for (std::size_t q = 0; q < A; ++q) {
        Proc& pr = R(q);
        const Word root = q >= Ap - 1 ? f.inclusive[0][q] : b.inclusive[0][A - 1 - q];
        if (root != root_of[Ap - 1]) throw std::logic_error("memory-tree root broadcast disagrees");
        m_.local(pr.id)[0] = root;
        fin.push_back(Script{pr.id, {wr(pr.contact().map.role(c_memory_root), root)}});
    }
    run_scripts(m_, fin, 1);
    map_.memory_tree_root = root_of[Ap - 1];
    stage("stage6_memory_tree", start);
}

MemoryMap Preprocessor::run()
{
    stage1();
    if (std::none_of(procs_.begin(), procs_.end(), [](const Proc& pr) { return pr.active; }))
        throw std::runtime_error("no active processor: no operational processor found a good segment");
    stage2();
    stage3();
    stage4();
    stage5();
    stage6();
    for (std::size_t q = 0; q < map_.active.size(); ++q) {
        const Proc& pr = R(q);
        map_.blocks.push_back(BlockRecord{pr.id, pr.segs, pr.capacity, pr.global_offset});
    }
    return map_;
}

}  // namespace

MemoryMap preprocess(FaultyMachine& machine, const SimulationParams& params)
{
    Preprocessor pre(machine, params);
    return pre.run();
}

std::string memory_map_to_json(const MemoryMap& map)
{
    nlohmann::ordered_json j;
    j["active_count"] = map.active.size();
    j["good_segments"] = map.stage1_segments;
    j["block_size"] = map.block_size;
    j["participants"] = map.participants;
    j["r"] = map.r;
    j["depth"] = map.depth;
    j["m_raw"] = map.m_raw;
    j["m_virtual"] = map.m_virtual;
    nlohmann::ordered_json st = nlohmann::ordered_json::object();
    for (const auto& s : map.stages) st[s.name] = s.rounds;
    j["stage_rounds"] = st;
    j["rounds_preprocessing"] = map.rounds();
    return j.dump(2);
}

}  // namespace ftpram
