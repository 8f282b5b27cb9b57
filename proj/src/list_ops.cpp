#include "ftpram/list_ops.hpp"

#include <bit>
#include <stdexcept>

namespace ftpram {

int ceil_log2(std::uint64_t x)
{
    if (x <= 1) return 0;
    return static_cast<int>(std::bit_width(x - 1));
}

namespace {

Word expect_ok(const AccessResult& r, const char* what)
{
    if (r.is_fault()) throw std::logic_error(std::string("structural cell turned out faulty: ") + what);
    return r.value();
}

}  // namespace

ScanResult list_scan(FaultyMachine& machine, const ListList& lists, const std::vector<std::vector<Word>>& init,
                     const Combine& combine, int iterations, bool with_exclusive)
{
    if (init.size() != lists.size()) throw std::invalid_argument("list_scan: init/list count mismatch");
    ScanResult res;
    const std::uint64_t start = machine.round();

    std::vector<std::vector<Word>> value(lists.size());
    std::vector<std::vector<std::optional<SegmentRef>>> link(lists.size());
    for (std::size_t l = 0; l < lists.size(); ++l) {
        if (init[l].size() != lists[l].size()) throw std::invalid_argument("list_scan: init size mismatch");
        value[l] = init[l];
        for (const auto& mem : lists[l]) link[l].push_back(mem.toward);
    }

    // Publish initial value and link.
    for (std::size_t l = 0; l < lists.size(); ++l)
        for (std::size_t i = 0; i < lists[l].size(); ++i)
            machine.write(lists[l][i].proc, lists[l][i].self.cell(ls_jump_value), value[l][i]);
    machine.end_round();
    for (std::size_t l = 0; l < lists.size(); ++l)
        for (std::size_t i = 0; i < lists[l].size(); ++i)
            machine.write(lists[l][i].proc, lists[l][i].self.cell(ls_jump_link), link[l][i] ? link[l][i]->pack() : kNull);
    machine.end_round();

    for (int it = 0; it < iterations; ++it) {
        std::vector<std::vector<Word>> got_value(lists.size());
        std::vector<std::vector<Word>> got_link(lists.size());
        for (std::size_t l = 0; l < lists.size(); ++l) {
            got_value[l].assign(lists[l].size(), 0);
            got_link[l].assign(lists[l].size(), kNull);
            for (std::size_t i = 0; i < lists[l].size(); ++i)
                if (link[l][i])
                    got_value[l][i] = expect_ok(machine.read(lists[l][i].proc, link[l][i]->cell(ls_jump_value)), "jump value");
        }
        machine.end_round();
        for (std::size_t l = 0; l < lists.size(); ++l)
            for (std::size_t i = 0; i < lists[l].size(); ++i)
                if (link[l][i])
                    got_link[l][i] = expect_ok(machine.read(lists[l][i].proc, link[l][i]->cell(ls_jump_link)), "jump link");
        machine.end_round();
        for (std::size_t l = 0; l < lists.size(); ++l)
            for (std::size_t i = 0; i < lists[l].size(); ++i)
                if (link[l][i]) {
                    value[l][i] = combine(got_value[l][i], value[l][i]);
                    machine.write(lists[l][i].proc, lists[l][i].self.cell(ls_jump_value), value[l][i]);
                }
        machine.end_round();
        for (std::size_t l = 0; l < lists.size(); ++l)
            for (std::size_t i = 0; i < lists[l].size(); ++i)
                if (link[l][i]) {
                    link[l][i] = got_link[l][i] == kNull ? std::nullopt
                                                         : std::optional<SegmentRef>(SegmentRef::unpack(got_link[l][i]));
                    machine.write(lists[l][i].proc, lists[l][i].self.cell(ls_jump_link),
                                  link[l][i] ? link[l][i]->pack() : kNull);
                }
        machine.end_round();
    }

    res.exclusive.resize(lists.size());
    if (with_exclusive) {
        for (std::size_t l = 0; l < lists.size(); ++l) {
            res.exclusive[l].assign(lists[l].size(), std::nullopt);
            for (std::size_t i = 0; i < lists[l].size(); ++i)
                if (lists[l][i].toward)
                    res.exclusive[l][i] =
                        expect_ok(machine.read(lists[l][i].proc, lists[l][i].toward->cell(ls_jump_value)), "jump value");
        }
        machine.end_round();
    }
    res.inclusive = std::move(value);
    res.final_link = std::move(link);
    res.rounds = machine.round() - start;
    return res;
}

std::vector<std::vector<Word>> list_broadcast(FaultyMachine& machine, const ListList& lists,
                                              const std::vector<Word>& head_values, int iterations)
{
    std::vector<std::vector<Word>> init(lists.size());
    for (std::size_t l = 0; l < lists.size(); ++l) {
        init[l].assign(lists[l].size(), 0);
        if (!lists[l].empty()) init[l][0] = head_values.at(l);
    }
    return list_scan(machine, lists, init, [](Word earlier, Word) { return earlier; }, iterations).inclusive;
}

}  // namespace ftpram
