#pragma once
#include <fstream>
#include <string>
#include <vector>

#include "pcf/genkahler.hpp"
#include "pcf/grf.hpp"

namespace pcf {

// One named array over the grid, row-major in (i0, i1, i2, i3). Complex channels store
// re, im interleaved, so data.size() is twice the point count.
struct Channel {
    std::string name;
    bool complex = false;
    std::vector<double> data;
};

// Binary container: 8-byte magic "PCFSNAP1", u64 little-endian header length, a JSON header
// (grid, kind, time, channel table), then the channels as little-endian f64.
struct Snapshot {
    ChartGrid grid;
    std::string kind;
    double t = 0;
    std::vector<Channel> channels;

    const Channel& channel(const std::string& name) const;
};

void write_snapshot(const std::string& path, const Snapshot& s);
Snapshot read_snapshot(const std::string& path);

Snapshot snapshot_of(const HermField& g, double t = 0);
HermField herm_from_snapshot(const Snapshot& s);
Snapshot snapshot_of(const GRFState& s, double t = 0);
GRFState grf_from_snapshot(const Snapshot& s);
Snapshot snapshot_of(const GKTriple& tr);
Snapshot snapshot_of(const SplitPotential& s, double t = 0);

// Shortest round-trip formatting, so identical runs give identical bytes.
class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& columns);
    void row(const std::vector<double>& values);
    std::size_t rows() const { return rows_; }

private:
    std::ofstream out_;
    std::size_t ncol_;
    std::size_t rows_ = 0;
};

std::string format_double(double v);

}  // namespace pcf
