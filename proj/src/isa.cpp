#include "ftpram/isa.hpp"

#include "ftpram/kernels.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace ftpram {

namespace {

struct OpInfo {
    Op op;
    const char* name;
};
constexpr OpInfo kOps[] = {
    {Op::loadi, "LOADI"}, {Op::mov, "MOV"},   {Op::add, "ADD"}, {Op::sub, "SUB"},
    {Op::mul, "MUL"},     {Op::read, "READ"}, {Op::write, "WRITE"}, {Op::jmp, "JMP"},
    {Op::beq, "BEQ"},     {Op::blt, "BLT"},   {Op::halt, "HALT"},
};

const char* op_name(Op op)
{
    for (const auto& o : kOps)
        if (o.op == op) return o.name;
    return "?";
}

std::string upper(std::string s)
{
    for (auto& ch : s) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    return s;
}

std::string reg_name(int r)
{
    if (r == kRegPid) return "PID";
    if (r == kRegNp) return "NP";
    return "R" + std::to_string(r);
}

bool is_ident(const std::string& s)
{
    if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
    return std::all_of(s.begin(), s.end(),
                       [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.'; });
}

Word parse_word(const std::string& tok, int line)
{
    std::string s = tok;
    bool neg = false;
    if (!s.empty() && (s[0] == '-' || s[0] == '+')) {
        neg = s[0] == '-';
        s = s.substr(1);
    }
    if (s.empty()) throw ParseError(line, "bad number '" + tok + "'");
    int base = 10;
    if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
        base = 16;
        s = s.substr(2);
    }
    std::size_t used = 0;
    Word v = 0;
    try {
        v = std::stoull(s, &used, base);
    } catch (const std::exception&) {
        throw ParseError(line, "bad number '" + tok + "'");
    }
    if (used != s.size()) throw ParseError(line, "bad number '" + tok + "'");
    return neg ? Word{0} - v : v;
}

class Parser {
public:
    explicit Parser(const std::string& text) : text_(text) {}

    Program run()
    {
        Program p;
        p.source = text_;
        std::istringstream in(text_);
        std::string raw;
        int line = 0;
        while (std::getline(in, raw)) {
            ++line;
            auto semi = raw.find(';');
            if (semi != std::string::npos) raw.resize(semi);
            std::string rest = raw;
            // leading labels
            for (;;) {
                auto colon = rest.find(':');
                if (colon == std::string::npos) break;
                std::string name = trim(rest.substr(0, colon));
                if (!is_ident(name)) throw ParseError(line, "bad label '" + name + "'");
                if (p.labels.count(name)) throw ParseError(line, "label '" + name + "' defined twice");
                p.labels[name] = p.code.size();
                rest = rest.substr(colon + 1);
            }
            auto toks = tokens(rest);
            if (toks.empty()) continue;
            p.code.push_back(instruction(toks, line));
        }
        for (auto& ins : p.code) {
            if (ins.label.empty()) continue;
            auto it = p.labels.find(ins.label);
            if (it == p.labels.end()) throw ParseError(ins.line, "undefined label '" + ins.label + "'");
            ins.target = it->second;
        }
        return p;
    }

private:
    static std::string trim(const std::string& s)
    {
        auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return "";
        auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    }

    static std::vector<std::string> tokens(const std::string& s)
    {
        std::vector<std::string> out;
        std::string cur;
        for (char ch : s) {
            if (std::isspace(static_cast<unsigned char>(ch)) || ch == ',') {
                if (!cur.empty()) out.push_back(cur);
                cur.clear();
            } else {
                cur += ch;
            }
        }
        if (!cur.empty()) out.push_back(cur);
        return out;
    }

    static int reg(const std::string& tok, int line, bool writable)
    {
        std::string u = upper(tok);
        int r = -1;
        if (u == "PID")
            r = kRegPid;
        else if (u == "NP")
            r = kRegNp;
        else if (u.size() >= 2 && u[0] == 'R' &&
                 std::all_of(u.begin() + 1, u.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }) &&
                 u.size() <= 3) {
            r = std::stoi(u.substr(1));
            if (r >= kGeneralRegisters) r = -1;
        }
        if (r < 0) throw ParseError(line, "bad register '" + tok + "'");
        if (writable && r >= kGeneralRegisters) throw ParseError(line, "register " + u + " is read-only");
        return r;
    }

    static int mem_reg(const std::string& tok, int line)
    {
        if (tok.size() < 3 || tok.front() != '[' || tok.back() != ']')
            throw ParseError(line, "expected [register], got '" + tok + "'");
        return reg(tok.substr(1, tok.size() - 2), line, false);
    }

    static std::string label(const std::string& tok, int line)
    {
        if (!is_ident(tok)) throw ParseError(line, "bad label '" + tok + "'");
        return tok;
    }

    static Instruction instruction(const std::vector<std::string>& t, int line)
    {
        Instruction ins;
        ins.line = line;
        const std::string m = upper(t[0]);
        const OpInfo* info = nullptr;
        for (const auto& o : kOps)
            if (m == o.name) info = &o;
        if (!info) throw ParseError(line, "unknown mnemonic '" + t[0] + "'");
        ins.op = info->op;
        auto want = [&](std::size_t n) {
            if (t.size() != n + 1)
                throw ParseError(line, std::string(info->name) + " takes " + std::to_string(n) + " operands");
        };
        switch (ins.op) {
        case Op::loadi:
            want(2);
            ins.a = reg(t[1], line, true);
            ins.imm = parse_word(t[2], line);
            break;
        case Op::mov:
            want(2);
            ins.a = reg(t[1], line, true);
            ins.b = reg(t[2], line, false);
            break;
        case Op::add:
        case Op::sub:
        case Op::mul:
            want(3);
            ins.a = reg(t[1], line, true);
            ins.b = reg(t[2], line, false);
            ins.c = reg(t[3], line, false);
            break;
        case Op::read:
            want(2);
            ins.a = reg(t[1], line, true);
            ins.b = mem_reg(t[2], line);
            break;
        case Op::write:
            want(2);
            ins.a = mem_reg(t[1], line);
            ins.b = reg(t[2], line, false);
            break;
        case Op::jmp:
            want(1);
            ins.label = label(t[1], line);
            break;
        case Op::beq:
        case Op::blt:
            want(3);
            ins.a = reg(t[1], line, false);
            ins.b = reg(t[2], line, false);
            ins.label = label(t[3], line);
            break;
        case Op::halt:
            want(0);
            break;
        }
        return ins;
    }

    const std::string& text_;
};

Word reg_value(const ProcState& s, int r, ProcId pid, std::size_t np)
{
    if (r == kRegPid) return pid;
    if (r == kRegNp) return np;
    return s.reg[static_cast<std::size_t>(r)];
}

}  // namespace

bool Instruction::same(const Instruction& o) const
{
    return op == o.op && a == o.a && b == o.b && c == o.c && imm == o.imm && label == o.label && target == o.target;
}

bool Program::operator==(const Program& o) const
{
    if (code.size() != o.code.size() || labels != o.labels) return false;
    for (std::size_t i = 0; i < code.size(); ++i)
        if (!code[i].same(o.code[i])) return false;
    return true;
}

ParseError::ParseError(int line, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line)
{
}

static std::string describe_semantic(std::uint64_t step, Address cell, const std::vector<ProcId>& procs,
                                     const std::string& what)
{
    std::ostringstream os;
    os << "step " << step << ", cell " << cell << ": " << what << " (processors";
    for (auto p : procs) os << ' ' << p;
    os << ')';
    return os.str();
}

SemanticError::SemanticError(std::uint64_t step, Address cell, std::vector<ProcId> procs, const std::string& what)
    : std::runtime_error(describe_semantic(step, cell, procs, what)), step_(step), cell_(cell), procs_(std::move(procs))
{
}

Program parse_program(const std::string& text) { return Parser(text).run(); }

std::string print_program(const Program& p)
{
    std::multimap<std::size_t, std::string> at;
    for (const auto& [name, pos] : p.labels) at.emplace(pos, name);
    std::ostringstream os;
    for (std::size_t i = 0; i <= p.code.size(); ++i) {
        auto range = at.equal_range(i);
        for (auto it = range.first; it != range.second; ++it) os << it->second << ":\n";
        if (i == p.code.size()) break;
        const auto& ins = p.code[i];
        os << "    " << op_name(ins.op);
        switch (ins.op) {
        case Op::loadi: os << ' ' << reg_name(ins.a) << ", " << ins.imm; break;
        case Op::mov: os << ' ' << reg_name(ins.a) << ", " << reg_name(ins.b); break;
        case Op::add:
        case Op::sub:
        case Op::mul: os << ' ' << reg_name(ins.a) << ", " << reg_name(ins.b) << ", " << reg_name(ins.c); break;
        case Op::read: os << ' ' << reg_name(ins.a) << ", [" << reg_name(ins.b) << ']'; break;
        case Op::write: os << " [" << reg_name(ins.a) << "], " << reg_name(ins.b); break;
        case Op::jmp: os << ' ' << ins.label; break;
        case Op::beq:
        case Op::blt: os << ' ' << reg_name(ins.a) << ", " << reg_name(ins.b) << ", " << ins.label; break;
        case Op::halt: break;
        }
        os << '\n';
    }
    return os.str();
}

std::vector<Word> parse_data(const std::string& text)
{
    std::vector<Word> out;
    std::istringstream in(text);
    std::string tok;
    while (in >> tok) out.push_back(parse_word(tok, 0));
    return out;
}

PendingAccess begin_step(const Program& prog, ProcState& s, ProcId pid, std::size_t np)
{
    PendingAccess acc;
    if (s.halted) return acc;
    if (s.pc >= prog.code.size()) {
        s.halted = true;
        return acc;
    }
    const Instruction& ins = prog.code[s.pc];
    ++s.steps;
    auto val = [&](int r) { return reg_value(s, r, pid, np); };
    auto& dst = s.reg[static_cast<std::size_t>(std::min(ins.a, kGeneralRegisters - 1))];
    std::size_t next = s.pc + 1;
    switch (ins.op) {
    case Op::loadi: dst = ins.imm; break;
    case Op::mov: dst = val(ins.b); break;
    case Op::add: dst = val(ins.b) + val(ins.c); break;
    case Op::sub: dst = val(ins.b) - val(ins.c); break;
    case Op::mul: dst = val(ins.b) * val(ins.c); break;
    case Op::read:
        acc = PendingAccess{true, AccessMode::read, val(ins.b), 0, ins.a};
        break;
    case Op::write:
        acc = PendingAccess{true, AccessMode::write, val(ins.a), val(ins.b), 0};
        break;
    case Op::jmp: next = ins.target; break;
    case Op::beq:
        if (val(ins.a) == val(ins.b)) next = ins.target;
        break;
    case Op::blt:
        if (val(ins.a) < val(ins.b)) next = ins.target;
        break;
    case Op::halt: s.halted = true; break;
    }
    s.pc = next;
    if (!s.halted && s.pc >= prog.code.size()) s.halted = true;
    return acc;
}

void finish_read(ProcState& s, const PendingAccess& acc, Word value)
{
    s.reg[static_cast<std::size_t>(acc.reg)] = value;
}

std::vector<std::pair<Address, Word>> resolve_step(Variant variant, std::uint64_t step,
                                                   const std::vector<AccessRecord>& ledger)
{
    auto verdict = kernels::validate_ledger_serial(variant, ledger);
    if (!verdict.conflicts.empty()) {
        const auto& c = verdict.conflicts.front();
        throw SemanticError(step, c.cell, c.procs, "concurrent access forbidden under " + to_string(variant));
    }
    return std::move(verdict.commits);
}

IdealResult run_ideal(const Program& prog, const std::vector<Word>& data, std::size_t n_sim, std::size_t m_sim,
                      Variant variant, std::uint64_t budget, bool keep_ledgers)
{
    if (data.size() > m_sim) throw std::invalid_argument("data longer than simulated memory");
    IdealResult res;
    res.memory.assign(m_sim, 0);
    std::copy(data.begin(), data.end(), res.memory.begin());
    std::vector<ProcState> st(n_sim);
    std::vector<PendingAccess> acc(n_sim);
    for (;;) {
        bool any = false;
        std::vector<AccessRecord> ledger;
        for (std::size_t i = 0; i < n_sim; ++i) {
            if (st[i].halted) continue;
            if (st[i].steps >= budget)
                throw BudgetError("processor " + std::to_string(i + 1) + " exceeded the step budget of " +
                                  std::to_string(budget));
            const auto before = st[i].steps;
            acc[i] = begin_step(prog, st[i], static_cast<ProcId>(i + 1), n_sim);
            if (st[i].steps != before) any = true;
            if (!acc[i].active) continue;
            if (acc[i].address >= m_sim)
                throw SemanticError(res.steps, acc[i].address, {static_cast<ProcId>(i + 1)},
                                    "address outside simulated memory");
            ledger.push_back(AccessRecord{static_cast<ProcId>(i + 1), acc[i].address, acc[i].mode, acc[i].value});
        }
        if (!any) break;
        auto commits = resolve_step(variant, res.steps, ledger);
        for (const auto& rec : ledger)
            if (rec.mode == AccessMode::read) finish_read(st[rec.proc - 1], acc[rec.proc - 1], res.memory[rec.address]);
        for (const auto& [cell, v] : commits) res.memory[cell] = v;
        if (keep_ledgers) res.ledgers.push_back(std::move(ledger));
        ++res.steps;
    }
    return res;
}

namespace programs {

std::string write_all()
{
    return "    LOADI R1, 1\n"
           "    SUB R2, PID, R1\n"
           "    WRITE [R2], R1\n"
           "    HALT\n";
}

std::string prefix_sum()
{
    // both branches of the body take seven steps so processors stay aligned
    return "; inclusive prefix sums by doubling\n"
           "        LOADI R3, 1\n"
           "        SUB R2, PID, R3     ; i\n"
           "        LOADI R1, 1         ; d\n"
           "loop:   BLT R1, NP, body\n"
           "        HALT\n"
           "body:   BLT R2, R1, idle\n"
           "        SUB R4, R2, R1\n"
           "        READ R5, [R4]\n"
           "        READ R6, [R2]\n"
           "        ADD R6, R6, R5\n"
           "        WRITE [R2], R6\n"
           "        JMP next\n"
           "idle:   MOV R0, R0\n"
           "        MOV R0, R0\n"
           "        MOV R0, R0\n"
           "        MOV R0, R0\n"
           "        MOV R0, R0\n"
           "        JMP next\n"
           "next:   ADD R1, R1, R1\n"
           "        JMP loop\n";
}

std::string odd_even_sort()
{
    // R8 = parity of i + phase; every path through a phase takes 8 steps
    return "; odd-even transposition sort\n"
           "        LOADI R3, 1\n"
           "        SUB R2, PID, R3     ; i\n"
           "        LOADI R8, 0\n"
           "        LOADI R4, 0\n"
           "par:    BLT R4, NP, partest\n"
           "        JMP start\n"
           "partest: BLT R4, R2, flip\n"
           "        MOV R0, R0\n"
           "        JMP parnext\n"
           "flip:   SUB R8, R3, R8\n"
           "        JMP parnext\n"
           "parnext: ADD R4, R4, R3\n"
           "        JMP par\n"
           "start:  LOADI R1, 0\n"
           "        ADD R5, R2, R3      ; i+1\n"
           "phase:  BLT R1, NP, check\n"
           "        HALT\n"
           "check:  BEQ R8, R3, skip1\n"
           "        BLT R5, NP, work\n"
           "        JMP skip2\n"
           "work:   READ R6, [R2]\n"
           "        READ R7, [R5]\n"
           "        BLT R7, R6, swap\n"
           "        MOV R0, R0\n"
           "        MOV R0, R0\n"
           "        JMP done\n"
           "swap:   WRITE [R2], R7\n"
           "        WRITE [R5], R6\n"
           "        JMP done\n"
           "skip1:  MOV R0, R0\n"
           "        MOV R0, R0\n"
           "skip2:  MOV R0, R0\n"
           "        MOV R0, R0\n"
           "        MOV R0, R0\n"
           "        MOV R0, R0\n"
           "        JMP done\n"
           "done:   SUB R8, R3, R8\n"
           "        ADD R1, R1, R3\n"
           "        JMP phase\n";
}

std::string random_straight_line(std::mt19937_64& rng, std::size_t n_sim, std::size_t m_sim, Variant variant,
                                 int length)
{
    if (n_sim == 0 || m_sim < n_sim) throw std::invalid_argument("random programs need m_sim >= n_sim >= 1");
    const std::size_t rows = m_sim / n_sim;
    std::ostringstream os;
    os << "    LOADI R3, 1\n    SUB R2, PID, R3\n";
    auto pick = [&](std::uint64_t lo, std::uint64_t hi) {
        return std::uniform_int_distribution<std::uint64_t>(lo, hi)(rng);
    };
    auto data_reg = [&] { return "R" + std::to_string(pick(4, 9)); };
    auto src_reg = [&] {
        auto k = pick(0, 7);
        if (k == 6) return std::string("PID");
        if (k == 7) return std::string("R2");
        return "R" + std::to_string(4 + k);
    };
    for (int i = 0; i < length; ++i) {
        auto kind = pick(0, 9);
        if (kind == 8 && variant == Variant::erew) kind = 6;
        if (kind == 9 && variant != Variant::crcw) kind = 7;
        switch (kind) {
        case 0: os << "    LOADI " << data_reg() << ", " << pick(0, 1000) << '\n'; break;
        case 1: os << "    ADD " << data_reg() << ", " << src_reg() << ", " << src_reg() << '\n'; break;
        case 2: os << "    SUB " << data_reg() << ", " << src_reg() << ", " << src_reg() << '\n'; break;
        case 3: os << "    MUL " << data_reg() << ", " << src_reg() << ", " << src_reg() << '\n'; break;
        case 4:
        case 5:
        case 6:
        case 7: {
            // exclusive cell c*NP + PID - 1
            os << "    LOADI R10, " << pick(0, rows - 1) << "\n    MUL R11, R10, NP\n    ADD R11, R11, R2\n";
            if (kind <= 5)
                os << "    READ " << data_reg() << ", [R11]\n";
            else
                os << "    WRITE [R11], " << src_reg() << '\n';
            break;
        }
        case 8:
            os << "    LOADI R11, " << pick(0, m_sim - 1) << "\n    READ " << data_reg() << ", [R11]\n";
            break;
        case 9:
            os << "    LOADI R11, " << pick(0, m_sim - 1) << "\n    WRITE [R11], " << src_reg() << '\n';
            break;
        }
    }
    os << "    HALT\n";
    return os.str();
}

}  // namespace programs

}  // namespace ftpram
