#include "pcf/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>

#include "json.hpp"
#include "pcf/errors.hpp"

namespace pcf {

namespace {

constexpr char kMagic[8] = {'P', 'C', 'F', 'S', 'N', 'A', 'P', '1'};

template <class T>
T to_le(T v) {
    if constexpr (std::endian::native == std::endian::little) return v;
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
    return v;
}

void put_u64(std::ostream& o, std::uint64_t v) {
    v = to_le(v);
    o.write(reinterpret_cast<const char*>(&v), 8);
}

std::uint64_t get_u64(std::istream& in) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 8);
    return to_le(v);
}

Channel real_channel(const std::string& name, const Field& f) { return {name, false, f}; }

const char* kAxes = "0123";

}  // namespace

const Channel& Snapshot::channel(const std::string& name) const {
    for (const auto& c : channels)
        if (c.name == name) return c;
    throw ValidationError("snapshot: no channel '" + name + "'");
}

void write_snapshot(const std::string& path, const Snapshot& s) {
    nlohmann::json h;
    h["format"] = "pcf-snapshot";
    h["version"] = 1;
    h["kind"] = s.kind;
    h["t"] = s.t;
    h["grid"] = {{"n", s.grid.n}, {"periods", s.grid.periods}};
    h["layout"] = "row-major i0 i1 i2 i3";
    h["dtype"] = "f64le";
    std::uint64_t offset = 0;
    for (const auto& c : s.channels) {
        std::size_t expect = s.grid.size() * (c.complex ? 2 : 1);
        if (c.data.size() != expect) throw ValidationError("snapshot channel '" + c.name + "': wrong length");
        h["channels"].push_back({{"name", c.name}, {"complex", c.complex}, {"offset", offset}, {"count", c.data.size()}});
        offset += c.data.size();
    }
    std::string head = h.dump();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot open " + path + " for writing");
    out.write(kMagic, 8);
    put_u64(out, head.size());
    out.write(head.data(), std::streamsize(head.size()));
    for (const auto& c : s.channels) {
        if constexpr (std::endian::native == std::endian::little) {
            out.write(reinterpret_cast<const char*>(c.data.data()), std::streamsize(c.data.size() * 8));
        } else {
            for (double v : c.data) {
                double w = to_le(v);
                out.write(reinterpret_cast<const char*>(&w), 8);
            }
        }
    }
    if (!out) throw ValidationError("write failed: " + path);
}

Snapshot read_snapshot(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0) throw ValidationError(path + ": not a snapshot container");
    std::uint64_t len = get_u64(in);
    if (len > (1u << 26)) throw ValidationError(path + ": header too large");
    std::string head(len, '\0');
    in.read(head.data(), std::streamsize(len));
    auto h = nlohmann::json::parse(head);
    Snapshot s;
    s.kind = h.at("kind").get<std::string>();
    s.t = h.at("t").get<double>();
    s.grid.n = h.at("grid").at("n").get<int>();
    s.grid.periods = h.at("grid").at("periods").get<std::array<double, 4>>();
    s.grid.validate();
    for (const auto& c : h.at("channels")) {
        Channel ch;
        ch.name = c.at("name").get<std::string>();
        ch.complex = c.at("complex").get<bool>();
        ch.data.resize(c.at("count").get<std::size_t>());
        in.read(reinterpret_cast<char*>(ch.data.data()), std::streamsize(ch.data.size() * 8));
        for (double& v : ch.data) v = to_le(v);
        s.channels.push_back(std::move(ch));
    }
    if (!in) throw ValidationError(path + ": truncated");
    return s;
}

Snapshot snapshot_of(const HermField& g, double t) {
    Snapshot s{g.grid, "hermitian", t, {}};
    s.channels.push_back(real_channel("g11", g.c[0]));
    s.channels.push_back(real_channel("g22", g.c[1]));
    Channel c{"g12", true, std::vector<double>(2 * g.size())};
    for (std::size_t p = 0; p < g.size(); ++p) {
        c.data[2 * p] = g.c[2][p];
        c.data[2 * p + 1] = g.c[3][p];
    }
    s.channels.push_back(std::move(c));
    return s;
}

HermField herm_from_snapshot(const Snapshot& s) {
    HermField g(s.grid);
    g.c[0] = s.channel("g11").data;
    g.c[1] = s.channel("g22").data;
    const auto& c = s.channel("g12").data;
    for (std::size_t p = 0; p < g.size(); ++p) {
        g.c[2][p] = c[2 * p];
        g.c[3][p] = c[2 * p + 1];
    }
    return g;
}

Snapshot snapshot_of(const GRFState& st, double t) {
    Snapshot s{st.grid(), "grf", t, {}};
    for (int a = 0; a < 4; ++a)
        for (int b = a; b < 4; ++b)
            s.channels.push_back(real_channel(std::string("g") + kAxes[a] + kAxes[b], st.g.c[sym_index(a, b)]));
    const char* hn[4] = {"H012", "H013", "H023", "H123"};
    for (int i = 0; i < 4; ++i) s.channels.push_back(real_channel(hn[i], st.H.c[i]));
    s.channels.push_back(real_channel("f", st.f));
    return s;
}

GRFState grf_from_snapshot(const Snapshot& s) {
    SymField g(s.grid);
    ThreeFormField H(s.grid);
    for (int a = 0; a < 4; ++a)
        for (int b = a; b < 4; ++b)
            g.c[sym_index(a, b)] = s.channel(std::string("g") + kAxes[a] + kAxes[b]).data;
    const char* hn[4] = {"H012", "H013", "H023", "H123"};
    for (int i = 0; i < 4; ++i) H.c[i] = s.channel(hn[i]).data;
    return GRFState(g, H, s.channel("f").data);
}

Snapshot snapshot_of(const GKTriple& tr) {
    Snapshot s{tr.grid(), "generalized-kahler", 0, {}};
    for (int a = 0; a < 4; ++a)
        for (int b = a; b < 4; ++b)
            s.channels.push_back(real_channel(std::string("g") + kAxes[a] + kAxes[b], tr.g.c[sym_index(a, b)]));
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) {
            s.channels.push_back(real_channel(std::string("I") + kAxes[a] + kAxes[b], tr.I.c[4 * a + b]));
        }
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
            s.channels.push_back(real_channel(std::string("J") + kAxes[a] + kAxes[b], tr.J.c[4 * a + b]));
    return s;
}

Snapshot snapshot_of(const SplitPotential& sp, double t) {
    Snapshot s{sp.grid, "split-potential", t, {}};
    s.channels.push_back(real_channel("f", sp.f));
    return s;
}

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& columns)
    : out_(path), ncol_(columns.size()) {
    if (!out_) throw ValidationError("cannot open " + path + " for writing");
    for (std::size_t i = 0; i < columns.size(); ++i) out_ << (i ? "," : "") << columns[i];
    out_ << '\n';
}

void CsvWriter::row(const std::vector<double>& values) {
    if (values.size() != ncol_) throw ValidationError("csv row has wrong width");
    for (std::size_t i = 0; i < values.size(); ++i) out_ << (i ? "," : "") << format_double(values[i]);
    out_ << '\n';
    ++rows_;
}

}  // namespace pcf
