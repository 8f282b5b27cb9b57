#include "ftpram/simulator.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

namespace ftpram {

namespace {

ProcId proc_of(const MemoryMap& map, std::size_t rank) { return map.active.at(rank); }

Address contact_cell(const MemoryMap& map, std::size_t rank, int role)
{
    return map.blocks.at(rank).segments.front().map.role(role);
}

Address record_cell(const MemoryMap& map, std::size_t rank, bool leaf)
{
    return contact_cell(map, rank, (leaf ? int{c_org_leaf} : int{c_org_internal}) + int{org_memory_node});
}

Word root_pointer(const FaultyMachine& machine, const MemoryMap& map, std::size_t rank)
{
    const auto& mem = machine.local(proc_of(map, rank));
    auto it = mem.find(0);
    if (it == mem.end()) throw std::logic_error("rank " + std::to_string(rank) + " does not know the memory root");
    return it->second;
}

Word must_read(FaultyMachine& machine, ProcId p, Address a)
{
    auto r = machine.read(p, a);
    if (r.is_fault()) throw std::logic_error("structural read of faulty cell " + std::to_string(a));
    return r.value();
}

void must_write(FaultyMachine& machine, ProcId p, Address a, Word v)
{
    if (machine.write(p, a, v).is_fault())
        throw std::logic_error("structural write to faulty cell " + std::to_string(a));
}

int direction(Address v, int depth, int level) { return static_cast<int>((v >> (depth - 1 - level)) & 1u); }

Address leaf_cell(Word ptr)
{
    if (ptr == kNull || ptr == kBlank || !is_leaf_pointer(ptr))
        throw std::logic_error("memory-tree walk did not end at a leaf");
    return decode_address(ptr);
}

void check_bounds(const MemoryMap& map, const std::vector<AccessRequest>& reqs)
{
    std::vector<char> seen(map.active.size(), 0);
    for (const auto& r : reqs) {
        if (r.vaddr >= map.m_virtual)
            throw std::out_of_range("virtual address " + std::to_string(r.vaddr) + " beyond m_virtual " +
                                    std::to_string(map.m_virtual));
        if (r.rank >= map.active.size()) throw std::out_of_range("request from a rank that is not active");
        if (seen[r.rank]++) throw std::logic_error("two requests from one rank in one access round");
    }
}

void verify_cells(const MemoryMap& map, const std::vector<AccessRequest>& reqs, const std::vector<Address>& cells,
                  TranslateStats* stats)
{
    if (!stats) return;
    const auto flat = flat_storage_table(map);
    for (std::size_t i = 0; i < reqs.size(); ++i)
        if (flat.at(reqs[i].vaddr) != cells[i])
            stats->violations.push_back("virtual address " + std::to_string(reqs[i].vaddr) + " translated to " +
                                        std::to_string(cells[i]) + ", flat table says " +
                                        std::to_string(flat[reqs[i].vaddr]));
}

// One organized tree walking down the memory tree; requests are all owned by
// ranks below the participant count.
std::vector<Address> traverse(FaultyMachine& machine, const MemoryMap& map, const OrgArena& arena, const OrgTree& tree,
                              std::size_t request_count)
{
    std::vector<Address> cells(request_count, 0);
    if (tree.empty()) return cells;
    const int D = map.depth;
    struct Group {
        int node;
        Word ptr;
    };
    std::vector<Group> groups{{tree.root, root_pointer(machine, map, arena.node(tree.root).owner)}};

    for (int d = 0; d < D; ++d) {
        std::vector<Group> moving, splits;
        for (const auto& g : groups) {
            const auto& n = arena.node(g.node);
            if (!n.leaf && n.path.length == d)
                splits.push_back(g);
            else
                moving.push_back(g);
        }
        // rounds 1-2: split owners hand the pointer to both subtree roots
        for (int side = 0; side < 2; ++side) {
            for (const auto& g : splits) {
                const auto& n = arena.node(g.node);
                const auto& child = arena.node(side == 0 ? n.left : n.right);
                must_write(machine, proc_of(map, n.owner), record_cell(map, child.owner, child.leaf), g.ptr);
            }
            machine.end_round();
        }
        // rounds 3-4: the new subtree roots pick it up, internal records first
        for (int leaf_role = 0; leaf_role < 2; ++leaf_role) {
            for (const auto& g : splits) {
                const auto& n = arena.node(g.node);
                for (int c : {n.left, n.right}) {
                    const auto& child = arena.node(c);
                    if (child.leaf != (leaf_role == 1)) continue;
                    Word got = must_read(machine, proc_of(map, child.owner), record_cell(map, child.owner, child.leaf));
                    if (got != g.ptr) throw std::logic_error("organized-tree pointer hand-off lost");
                    moving.push_back(Group{c, got});
                }
            }
            machine.end_round();
        }
        // rounds 5-6: every group descends one level
        for (int leaf_role = 0; leaf_role < 2; ++leaf_role) {
            for (auto& g : moving) {
                const auto& n = arena.node(g.node);
                if (n.leaf != (leaf_role == 1)) continue;
                const int bit = direction(n.leftmost, D, d);
                if (!n.leaf && direction(n.rightmost, D, d) != bit)
                    throw std::logic_error("organized subtree spans both children below its split");
                if (is_leaf_pointer(g.ptr)) throw std::logic_error("memory-tree walk reached a leaf early");
                g.ptr = must_read(machine, proc_of(map, n.owner), child_cell(g.ptr, bit == 1));
            }
            machine.end_round();
        }
        groups = std::move(moving);
    }
    for (const auto& g : groups) {
        const auto& n = arena.node(g.node);
        if (!n.leaf) throw std::logic_error("organized tree did not split into single requests");
        cells.at(n.request) = leaf_cell(g.ptr);
    }
    return cells;
}

}  // namespace

std::vector<std::size_t> assign_simulated(std::size_t active, std::size_t n_sim)
{
    if (active == 0) throw std::invalid_argument("no active processors");
    std::vector<std::size_t> rank(n_sim);
    for (std::size_t j = 1; j <= n_sim; ++j) rank[j - 1] = (j - 1) * active / n_sim;
    return rank;
}

std::vector<Address> translate_concurrent(FaultyMachine& machine, const MemoryMap& map,
                                          const std::vector<AccessRequest>& reqs, TranslateStats* stats)
{
    check_bounds(map, reqs);
    const auto start = machine.round();
    std::vector<Word> ptr(reqs.size());
    for (std::size_t i = 0; i < reqs.size(); ++i) ptr[i] = root_pointer(machine, map, reqs[i].rank);
    for (int d = 0; d < map.depth && !reqs.empty(); ++d) {
        for (std::size_t i = 0; i < reqs.size(); ++i) {
            if (is_leaf_pointer(ptr[i])) throw std::logic_error("memory-tree walk reached a leaf early");
            ptr[i] = must_read(machine, proc_of(map, reqs[i].rank),
                               child_cell(ptr[i], direction(reqs[i].vaddr, map.depth, d) == 1));
        }
        machine.end_round();
    }
    std::vector<Address> cells(reqs.size());
    for (std::size_t i = 0; i < reqs.size(); ++i) cells[i] = leaf_cell(ptr[i]);
    if (stats) stats->rounds += machine.round() - start;
    return cells;
}

std::vector<Address> translate_organized(FaultyMachine& machine, const MemoryMap& map,
                                         const std::vector<AccessRequest>& reqs, TranslateStats* stats, bool verify)
{
    check_bounds(map, reqs);
    const auto start = machine.round();
    const std::size_t P = map.participants;
    std::vector<Address> cells(reqs.size(), 0);
    if (reqs.empty()) return cells;

    std::vector<std::size_t> direct, handed;
    for (std::size_t i = 0; i < reqs.size(); ++i) (reqs[i].rank < P ? direct : handed).push_back(i);
    auto partner_of = [&](std::size_t rank) {
        const auto& p = map.partner.at(rank);
        if (!p) throw std::logic_error("rank " + std::to_string(rank) + " has no partner");
        return *p;
    };
    auto hand_cell = [&](std::size_t rank) { return contact_cell(map, rank, int{c_org_leaf} + int{org_requested}); };

    if (!handed.empty()) {
        for (std::size_t i : handed)
            must_write(machine, proc_of(map, reqs[i].rank), hand_cell(partner_of(reqs[i].rank)),
                       encode_address(reqs[i].vaddr));
        machine.end_round();
        for (std::size_t i : handed) {
            const std::size_t q = partner_of(reqs[i].rank);
            if (decode_address(must_read(machine, proc_of(map, q), hand_cell(q))) != reqs[i].vaddr)
                throw std::logic_error("request hand-off lost");
        }
        machine.end_round();
    }

    for (const auto* batch : {&direct, &handed}) {
        if (batch->empty()) continue;
        std::vector<std::optional<Address>> by_rank(P);
        std::vector<std::size_t> req_of(P, 0);
        for (std::size_t i : *batch) {
            const std::size_t owner = reqs[i].rank < P ? reqs[i].rank : partner_of(reqs[i].rank);
            by_rank[owner] = reqs[i].vaddr;
            req_of[owner] = i;
        }
        OrgArena arena(map.depth);
        Construction built = construct_organized(arena, by_rank);
        machine.idle(built.rounds);
        if (stats) {
            stats->construction_rounds += built.rounds;
            ++stats->trees;
            for (int k = 0; k < 4; ++k) stats->merge_calls[k] += built.calls[k];
            if (verify)
                for (auto& v : check_organized(arena, built.tree)) stats->violations.push_back(std::move(v));
        }
        auto got = traverse(machine, map, arena, built.tree, P);
        for (std::size_t owner = 0; owner < P; ++owner)
            if (by_rank[owner]) cells[req_of[owner]] = got[owner];
    }

    if (!handed.empty()) {
        for (std::size_t i : handed)
            must_write(machine, proc_of(map, partner_of(reqs[i].rank)), hand_cell(reqs[i].rank),
                       encode_address(cells[i]));
        machine.end_round();
        for (std::size_t i : handed)
            if (decode_address(must_read(machine, proc_of(map, reqs[i].rank), hand_cell(reqs[i].rank))) != cells[i])
                throw std::logic_error("translation hand-back lost");
        machine.end_round();
    }
    if (stats) stats->rounds += machine.round() - start;
    return cells;
}

std::vector<Address> translate(FaultyMachine& machine, const MemoryMap& map, const std::vector<AccessRequest>& reqs,
                               TranslateStats* stats, bool verify)
{
    auto cells = machine.variant() == Variant::erew ? translate_organized(machine, map, reqs, stats, verify)
                                                    : translate_concurrent(machine, map, reqs, stats);
    if (verify) verify_cells(map, reqs, cells, stats);
    return cells;
}

std::vector<Word> encode_program(const Program& prog)
{
    std::vector<Word> out;
    out.reserve(prog.code.size() * 2);
    for (const auto& ins : prog.code) {
        out.push_back(Word{static_cast<std::uint8_t>(ins.op)} | Word{static_cast<std::uint8_t>(ins.a)} << 8 |
                      Word{static_cast<std::uint8_t>(ins.b)} << 16 | Word{static_cast<std::uint8_t>(ins.c)} << 24 |
                      Word{ins.target} << 32);
        out.push_back(ins.imm);
    }
    return out;
}

std::vector<Address> memory_tree_inorder(const FaultyMachine& machine, const MemoryMap& map)
{
    std::vector<Address> out;
    std::vector<Word> stack{map.memory_tree_root};
    while (!stack.empty()) {
        Word p = stack.back();
        stack.pop_back();
        if (p == kNull || p == kBlank) throw std::logic_error("broken memory-tree pointer");
        if (is_leaf_pointer(p)) {
            out.push_back(decode_address(p));
            continue;
        }
        stack.push_back(machine.peek(child_cell(p, true)));
        stack.push_back(machine.peek(child_cell(p, false)));
    }
    return out;
}

Installed install_input(FaultyMachine& machine, const MemoryMap& map, const Program& prog,
                        const std::vector<Word>& data, std::size_t m_sim, const SimOptions& opt,
                        TranslateStats* stats)
{
    if (data.size() > m_sim) throw std::length_error("data longer than simulated memory");
    std::vector<Word> image = encode_program(prog);
    Installed inst{image.size(), m_sim, 0};
    if (image.size() + m_sim > map.m_virtual)
        throw std::length_error("program image (" + std::to_string(image.size()) + " words) plus m_sim " +
                                std::to_string(m_sim) + " exceed m_virtual " + std::to_string(map.m_virtual));
    image.insert(image.end(), data.begin(), data.end());
    image.resize(inst.program_words + m_sim, 0);

    const auto start = machine.round();
    const std::size_t A = map.active.size();
    for (std::size_t base = 0; base < image.size(); base += A) {
        std::vector<AccessRequest> reqs;
        for (std::size_t w = base; w < std::min(image.size(), base + A); ++w) reqs.push_back({w - base, w});
        auto cells = translate(machine, map, reqs, stats, opt.verify);
        for (std::size_t i = 0; i < reqs.size(); ++i)
            machine.write(proc_of(map, reqs[i].rank), cells[i], image[reqs[i].vaddr]);
        machine.end_round();
    }
    inst.rounds = machine.round() - start;
    return inst;
}

std::vector<Word> read_simulated(const FaultyMachine& machine, const MemoryMap& map, const Installed& inst)
{
    const auto leaves = memory_tree_inorder(machine, map);
    std::vector<Word> mem(inst.m_sim);
    for (std::size_t a = 0; a < inst.m_sim; ++a) mem[a] = machine.peek(leaves.at(inst.program_words + a));
    return mem;
}

SimResult simulate_program(FaultyMachine& machine, const MemoryMap& map, const Program& prog,
                           const std::vector<Word>& data, std::size_t n_sim, std::size_t m_sim, std::uint64_t budget,
                           const SimOptions& opt)
{
    if (n_sim == 0 || n_sim > machine.n()) throw std::invalid_argument("n_sim must be in [1, n]");
    SimResult res;
    const auto run_start = machine.round();
    if (opt.verify) {
        if (memory_tree_inorder(machine, map) != flat_storage_table(map))
            res.violations.push_back("memory-tree leaves differ from the flat storage table");
        for (auto& v : check_offsets(map)) res.violations.push_back(std::move(v));
    }
    Installed inst = install_input(machine, map, prog, data, m_sim, opt, &res.translate);
    res.rounds_install = inst.rounds;

    const auto rank_of = assign_simulated(map.active.size(), n_sim);
    // slot of simulated processor j: its position among those of its rank
    std::vector<std::size_t> slot(n_sim);
    std::map<std::size_t, std::size_t> load;
    for (std::size_t j = 0; j < n_sim; ++j) slot[j] = load[rank_of[j]]++;
    for (const auto& [r, l] : load) res.max_load = std::max(res.max_load, l);
    const std::size_t L = res.max_load;

    std::vector<ProcState> st(n_sim);
    std::vector<PendingAccess> acc(n_sim);
    for (;;) {
        const auto step_start = machine.round();
        bool any = false;
        std::vector<AccessRecord> ledger;
        for (std::size_t j = 0; j < n_sim; ++j) {
            if (st[j].halted) continue;
            if (st[j].steps >= budget)
                throw BudgetError("processor " + std::to_string(j + 1) + " exceeded the step budget of " +
                                  std::to_string(budget));
            const auto before = st[j].steps;
            acc[j] = begin_step(prog, st[j], static_cast<ProcId>(j + 1), n_sim);
            if (st[j].steps != before) any = true;
            if (!acc[j].active) continue;
            if (acc[j].address >= m_sim)
                throw SemanticError(res.steps, acc[j].address, {static_cast<ProcId>(j + 1)},
                                    "address outside simulated memory");
            ledger.push_back(AccessRecord{static_cast<ProcId>(j + 1), acc[j].address, acc[j].mode, acc[j].value});
        }
        if (!any) break;
        // local work of every simulated processor
        machine.idle(L);
        if (!ledger.empty()) {
            ++res.access_steps;
            auto commits = resolve_step(machine.variant(), res.steps, ledger);
            // lowest-PID writer per cell carries the committed value
            std::map<Address, ProcId> winner;
            for (const auto& rec : ledger)
                if (rec.mode == AccessMode::write && !winner.count(rec.address)) winner[rec.address] = rec.proc;

            std::vector<std::vector<std::size_t>> by_slot(L);
            for (const auto& rec : ledger) {
                const std::size_t j = rec.proc - 1;
                if (rec.mode == AccessMode::write && winner[rec.address] != rec.proc) continue;
                by_slot[slot[j]].push_back(j);
            }
            std::vector<Address> cell(n_sim, 0);
            for (std::size_t s = 0; s < L; ++s) {
                std::vector<AccessRequest> reqs;
                for (std::size_t j : by_slot[s]) reqs.push_back({rank_of[j], inst.program_words + acc[j].address});
                auto cells = translate(machine, map, reqs, &res.translate, opt.verify);
                for (std::size_t i = 0; i < reqs.size(); ++i) cell[by_slot[s][i]] = cells[i];
            }
            for (AccessMode mode : {AccessMode::read, AccessMode::write}) {
                for (std::size_t s = 0; s < L; ++s) {
                    for (std::size_t j : by_slot[s]) {
                        if (acc[j].mode != mode) continue;
                        const ProcId p = proc_of(map, rank_of[j]);
                        if (mode == AccessMode::read) {
                            auto r = machine.read(p, cell[j]);
                            if (r.is_fault()) throw std::logic_error("storage cell turned out faulty");
                            finish_read(st[j], acc[j], r.value());
                        } else {
                            machine.write(p, cell[j], acc[j].value);
                        }
                    }
                    machine.end_round();
                }
            }
            (void)commits;
        }
        res.rounds_per_step.push_back(machine.round() - step_start);
        if (!ledger.empty()) res.rounds_access += res.rounds_per_step.back();
        ++res.steps;
    }
    res.memory = read_simulated(machine, map, inst);
    res.rounds_total = machine.round() - run_start;
    for (auto& v : res.translate.violations) res.violations.push_back(v);
    return res;
}

}  // namespace ftpram
