#include "ftpram/substrate.hpp"

#include "ftpram/kernels.hpp"

#include <algorithm>
#include <sstream>

namespace ftpram {

std::string to_string(Variant v)
{
    switch (v) {
    case Variant::erew: return "erew";
    case Variant::crew: return "crew";
    case Variant::crcw: return "crcw";
    }
    return "?";
}

Variant parse_variant(const std::string& s)
{
    std::string l = s;
    std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return std::tolower(c); });
    if (l == "erew") return Variant::erew;
    if (l == "crew") return Variant::crew;
    if (l == "crcw" || l == "crcw-priority") return Variant::crcw;
    throw std::invalid_argument("unknown PRAM variant: " + s);
}

static std::string describe(const ConflictReport& r)
{
    std::ostringstream os;
    os << "access conflict in round " << r.round << ":";
    for (const auto& c : r.conflicts) {
        os << " cell " << c.cell << " {";
        for (std::size_t i = 0; i < c.procs.size(); ++i) os << (i ? "," : "") << "P" << c.procs[i];
        os << "}";
    }
    return os.str();
}

ConflictError::ConflictError(ConflictReport r) : std::runtime_error(describe(r)), report_(std::move(r)) {}

FaultyMachine::FaultyMachine(std::size_t n, std::size_t m, Variant variant, const FaultPattern& pattern)
    : n_(n), variant_(variant)
{
    if (n < 1) throw ConstructionError("machine needs at least one processor");
    if (m < n) throw ConstructionError("machine needs m >= n");
    for (ProcId p : pattern.faulty_processors)
        if (p < 1 || p > n)
            throw ConstructionError("faulty processor index " + std::to_string(p) + " outside [1," +
                                    std::to_string(n) + "]");
    for (Address a : pattern.faulty_cells)
        if (a >= m)
            throw ConstructionError("faulty cell address " + std::to_string(a) + " outside [0," +
                                    std::to_string(m) + ")");
    cells_.assign(m, 0);
    cell_ok_.assign(m, 1);
    proc_ok_.assign(n, 1);
    for (ProcId p : pattern.faulty_processors) proc_ok_[p - 1] = 0;
    for (Address a : pattern.faulty_cells) cell_ok_[a] = 0;
    slots_.resize(n);
    local_.resize(n);
    per_proc_accesses_.assign(n, 0);
}

bool FaultyMachine::processor_ok(ProcId p) const
{
    return p >= 1 && p <= n_ && proc_ok_[p - 1] != 0;
}

bool FaultyMachine::cell_ok(Address a) const
{
    return a < cells_.size() && cell_ok_[a] != 0;
}

std::size_t FaultyMachine::faulty_processor_count() const
{
    return static_cast<std::size_t>(std::count(proc_ok_.begin(), proc_ok_.end(), 0));
}

std::size_t FaultyMachine::faulty_cell_count() const
{
    return static_cast<std::size_t>(std::count(cell_ok_.begin(), cell_ok_.end(), 0));
}

void FaultyMachine::check_processor(ProcId p) const
{
    if (p < 1 || p > n_) throw std::logic_error("processor index out of range");
    if (!proc_ok_[p - 1]) throw std::logic_error("fail-stop processor P" + std::to_string(p) + " cannot act");
}

FaultyMachine::Slot& FaultyMachine::claim(ProcId p, Address a)
{
    check_processor(p);
    if (a >= cells_.size()) throw std::logic_error("address " + std::to_string(a) + " outside shared memory");
    Slot& s = slots_[p - 1];
    if (s.stamp == round_ + 1)
        throw std::logic_error("P" + std::to_string(p) + " accessed shared memory twice in round " +
                               std::to_string(round_));
    s.stamp = round_ + 1;
    ++per_proc_accesses_[p - 1];
    return s;
}

AccessResult FaultyMachine::read(ProcId p, Address a)
{
    Slot& s = claim(p, a);
    s.record = AccessRecord{p, a, AccessMode::read, 0};
    if (!cell_ok_[a]) return AccessResult::fault_notice();
    return AccessResult::ok(cells_[a]);
}

AccessResult FaultyMachine::write(ProcId p, Address a, Word v)
{
    Slot& s = claim(p, a);
    s.record = AccessRecord{p, a, AccessMode::write, v};
    if (!cell_ok_[a]) return AccessResult::fault_notice();
    return AccessResult::ok(v);
}

std::vector<AccessRecord> FaultyMachine::open_ledger() const
{
    std::vector<AccessRecord> out;
    for (const Slot& s : slots_)
        if (s.stamp == round_ + 1) out.push_back(s.record);
    return out;
}

std::size_t FaultyMachine::open_access_count() const
{
    std::size_t c = 0;
    for (const Slot& s : slots_) c += (s.stamp == round_ + 1);
    return c;
}

ConflictReport FaultyMachine::end_round()
{
    std::vector<AccessRecord> ledger = open_ledger();
    kernels::LedgerVerdict verdict = parallel_validation_ ? kernels::validate_ledger_parallel(variant_, ledger)
                                                          : kernels::validate_ledger_serial(variant_, ledger);
    // Writes to faulty cells are signalled and dropped.
    for (const auto& [addr, value] : verdict.commits)
        if (cell_ok_[addr]) cells_[addr] = value;

    ConflictReport report{round_, std::move(verdict.conflicts)};
    total_conflicts_ += report.conflicts.size();
    total_accesses_ += ledger.size();
    if (trace_) trace_(round_, ledger.size());
    if (keep_history_) history_.push_back(std::move(ledger));
    ++round_;
    if (strict_ && !report.empty()) throw ConflictError(report);
    return report;
}

void FaultyMachine::idle(std::uint64_t rounds)
{
    if (open_access_count() != 0) throw std::logic_error("idle() while a round has pending accesses");
    for (std::uint64_t i = 0; i < rounds; ++i) {
        if (trace_) trace_(round_, 0);
        if (keep_history_) history_.emplace_back();
        ++round_;
    }
}

std::uint64_t FaultyMachine::accesses_by(ProcId p) const
{
    if (p < 1 || p > n_) throw std::out_of_range("processor index out of range");
    return per_proc_accesses_[p - 1];
}

FaultyMachine::LocalMemory& FaultyMachine::local(ProcId p)
{
    if (p < 1 || p > n_) throw std::out_of_range("processor index out of range");
    return local_[p - 1];
}

const FaultyMachine::LocalMemory& FaultyMachine::local(ProcId p) const
{
    if (p < 1 || p > n_) throw std::out_of_range("processor index out of range");
    return local_[p - 1];
}

Word FaultyMachine::peek(Address a) const
{
    if (a >= cells_.size()) throw std::out_of_range("address outside shared memory");
    return cells_[a];
}

std::uint64_t run_lockstep(FaultyMachine& machine, std::span<const ProcId> procs,
                           const std::function<bool(std::size_t, std::uint64_t)>& step, std::uint64_t min_rounds)
{
    std::vector<std::uint8_t> running(procs.size(), 1);
    std::size_t live = procs.size();
    std::uint64_t r = 0;
    while (live > 0) {
        for (std::size_t i = 0; i < procs.size(); ++i) {
            if (!running[i]) continue;
            if (!step(i, r)) {
                running[i] = 0;
                --live;
            }
        }
        if (live == 0 && machine.open_access_count() == 0) break;
        machine.end_round();
        ++r;
    }
    if (r < min_rounds) machine.idle(min_rounds - r);
    return std::max(r, min_rounds);
}

}  // namespace ftpram
