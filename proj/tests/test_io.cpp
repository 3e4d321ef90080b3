#include "doctest.h"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <sstream>

#include "pcf/errors.hpp"
#include "pcf/io.hpp"
#include "pcf/potential.hpp"

using namespace pcf;
namespace fs = std::filesystem;

namespace {

std::string tmp(const std::string& name) { return (fs::temp_directory_path() / ("pcf_io_" + name)).string(); }

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("hermitian snapshot round trip") {
    ChartGrid g(8);
    HermField w = random_alpha(4, 4, 1, 0.05).metric_field(g);
    std::string path = tmp("herm.bin");
    write_snapshot(path, snapshot_of(w, 0.75));
    Snapshot s = read_snapshot(path);
    CHECK(s.kind == "hermitian");
    CHECK(s.t == 0.75);
    CHECK(s.grid == g);
    CHECK(herm_from_snapshot(s).sup_diff(w) == 0.0);

    // g12 is stored re, im interleaved right after g11 and g22
    std::string bytes = slurp(path);
    CHECK(bytes.substr(0, 8) == "PCFSNAP1");
    std::uint64_t hl;
    std::memcpy(&hl, bytes.data() + 8, 8);
    std::size_t base = 16 + hl + 2 * g.size() * 8;
    double re, im;
    std::memcpy(&re, bytes.data() + base + 16 * 5, 8);
    std::memcpy(&im, bytes.data() + base + 16 * 5 + 8, 8);
    CHECK(re == w.c[2][5]);
    CHECK(im == w.c[3][5]);
    CHECK(bytes.size() == 16 + hl + 4 * g.size() * 8);
    fs::remove(path);
}

TEST_CASE("grf snapshot round trip") {
    ChartGrid g(8);
    HermField w = random_alpha(9, 4, 1, 0.05).metric_field(g);
    Field f(g.size());
    for (std::size_t p = 0; p < f.size(); ++p) f[p] = std::sin(g.coords(p)[2]);
    GRFState st(SymField::from_herm(w), ThreeFormField::torsion_of(w), f);
    std::string path = tmp("grf.bin");
    write_snapshot(path, snapshot_of(st, 1.5));
    GRFState back = grf_from_snapshot(read_snapshot(path));
    CHECK(back.g.sup_diff(st.g) == 0.0);
    CHECK(back.f == st.f);
    for (int i = 0; i < 4; ++i) CHECK(back.H.c[i] == st.H.c[i]);
    fs::remove(path);
}

TEST_CASE("bad containers are rejected") {
    std::string path = tmp("junk.bin");
    {
        std::ofstream o(path, std::ios::binary);
        o << "not a snapshot at all";
    }
    CHECK_THROWS_AS(read_snapshot(path), ValidationError);
    CHECK_THROWS_AS(read_snapshot(tmp("missing.bin")), ValidationError);
    fs::remove(path);
}

TEST_CASE("csv is byte deterministic") {
    auto write = [](const std::string& path) {
        CsvWriter w(path, {"t", "x"});
        for (int i = 0; i < 5; ++i) w.row({0.1 * i, std::exp(-0.1 * i)});
    };
    std::string a = tmp("a.csv"), b = tmp("b.csv");
    write(a);
    write(b);
    CHECK(slurp(a) == slurp(b));
    CHECK(slurp(a).substr(0, 4) == "t,x\n");
    CHECK(format_double(0.1) == "0.1");
    CsvWriter w(a, {"t"});
    CHECK_THROWS_AS(w.row({1, 2}), ValidationError);
    fs::remove(a);
    fs::remove(b);
}
