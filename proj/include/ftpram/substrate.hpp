#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace ftpram {

using Word = std::uint64_t;
using Address = std::uint64_t;
/// Physical processor index, 1-based as in the machine model.
using ProcId = std::uint32_t;

enum class Variant : std::uint8_t { erew, crew, crcw };

std::string to_string(Variant v);
Variant parse_variant(const std::string& s);

enum class AccessMode : std::uint8_t { read, write };

struct FaultPattern {
    std::set<ProcId> faulty_processors;
    std::set<Address> faulty_cells;
};

/// Outcome of one shared-memory access. A fault notice is returned iff the
/// target cell is non-operational.
class AccessResult {
public:
    static AccessResult ok(Word v) { return AccessResult(true, v); }
    static AccessResult fault_notice() { return AccessResult(false, 0); }

    bool is_ok() const { return ok_; }
    bool is_fault() const { return !ok_; }
    Word value() const
    {
        if (!ok_) throw std::logic_error("value() on a fault notice");
        return value_;
    }

    bool operator==(const AccessResult&) const = default;

private:
    AccessResult(bool ok, Word v) : ok_(ok), value_(v) {}
    bool ok_;
    Word value_;
};

struct AccessRecord {
    ProcId proc = 0;
    Address address = 0;
    AccessMode mode = AccessMode::read;
    Word value = 0;
};

struct Conflict {
    Address cell = 0;
    std::vector<ProcId> procs;
};

struct ConflictReport {
    std::uint64_t round = 0;
    std::vector<Conflict> conflicts;
    bool empty() const { return conflicts.empty(); }
};

class ConstructionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class ConflictError : public std::runtime_error {
public:
    explicit ConflictError(ConflictReport r);
    const ConflictReport& report() const { return report_; }

private:
    ConflictReport report_;
};

/// A PRAM with static faults. Rounds are synchronous: reads observe the
/// contents at the start of the round, writes are buffered and committed by
/// end_round(), which also validates the round's ledger against the variant.
/// Each operational processor performs at most one shared access per round.
class FaultyMachine {
public:
    FaultyMachine(std::size_t n, std::size_t m, Variant variant, const FaultPattern& pattern);

    std::size_t n() const { return n_; }
    std::size_t m() const { return cells_.size(); }
    Variant variant() const { return variant_; }
    std::uint64_t round() const { return round_; }

    bool processor_ok(ProcId p) const;
    bool cell_ok(Address a) const;
    std::size_t faulty_processor_count() const;
    std::size_t faulty_cell_count() const;

    AccessResult read(ProcId p, Address a);
    AccessResult write(ProcId p, Address a, Word v);

    /// Validates and commits the open round. In strict mode (the default) a
    /// non-empty report is thrown as ConflictError after the round is closed.
    ConflictReport end_round();

    /// Charges rounds in which no processor touches shared memory.
    void idle(std::uint64_t rounds);

    /// Accesses recorded so far in the open round.
    std::vector<AccessRecord> open_ledger() const;
    std::size_t open_access_count() const;

    void set_strict(bool strict) { strict_ = strict; }
    bool strict() const { return strict_; }

    /// Uses the OpenMP ledger-validation kernel instead of the serial one.
    void set_parallel_validation(bool on) { parallel_validation_ = on; }

    /// Called once per closed round with (round index, access count).
    void set_trace(std::function<void(std::uint64_t, std::size_t)> trace) { trace_ = std::move(trace); }

    /// Records every closed round's ledger (test oracle support).
    void set_keep_history(bool on) { keep_history_ = on; }
    const std::vector<std::vector<AccessRecord>>& history() const { return history_; }

    std::uint64_t total_conflicts() const { return total_conflicts_; }
    std::uint64_t total_accesses() const { return total_accesses_; }
    /// Accesses performed by processor p over the whole run.
    std::uint64_t accesses_by(ProcId p) const;

    using LocalMemory = std::unordered_map<Word, Word>;
    LocalMemory& local(ProcId p);
    const LocalMemory& local(ProcId p) const;

    /// Direct inspection without charging a step; not part of the modeled machine.
    Word peek(Address a) const;

private:
    struct Slot {
        std::uint64_t stamp = 0;  // round_ + 1 when the slot is in use
        AccessRecord record;
    };

    void check_processor(ProcId p) const;
    Slot& claim(ProcId p, Address a);

    std::size_t n_;
    Variant variant_;
    std::vector<Word> cells_;
    std::vector<std::uint8_t> cell_ok_;
    std::vector<std::uint8_t> proc_ok_;
    std::vector<Slot> slots_;
    std::vector<LocalMemory> local_;
    std::vector<std::uint64_t> per_proc_accesses_;
    std::uint64_t round_ = 0;
    std::uint64_t total_conflicts_ = 0;
    std::uint64_t total_accesses_ = 0;
    bool strict_ = true;
    bool parallel_validation_ = false;
    bool keep_history_ = false;
    std::function<void(std::uint64_t, std::size_t)> trace_;
    std::vector<std::vector<AccessRecord>> history_;
};

/// Runs per-processor step functions in lockstep. In each round the step of
/// every unfinished processor is invoked once with its local round number;
/// it may perform at most one access and returns true if it used the round.
/// A call returning false must not access memory and retires the processor.
/// The phase lasts until all are retired and at least `min_rounds` rounds.
/// Returns the number of rounds used.
std::uint64_t run_lockstep(FaultyMachine& machine, std::span<const ProcId> procs,
                           const std::function<bool(std::size_t index, std::uint64_t local_round)>& step,
                           std::uint64_t min_rounds = 0);

}  // namespace ftpram
