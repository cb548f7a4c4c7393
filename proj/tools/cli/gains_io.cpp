#include "cli/gains_io.hpp"

#include <fmt/format.h>

#include <fstream>
#include <sstream>
#include <string>

namespace delayvib::cli {

void write_gains(std::ostream& out, const GainMatrix& gain) {
    gain.validate();
    const GainDims& d = gain.dims;
    out << fmt::format("dims {} {} {} {}\n", d.n_c, d.n_u, d.n_y, d.n_delays);
    for (Eigen::Index i = 0; i < gain.K.rows(); ++i) {
        for (Eigen::Index j = 0; j < gain.K.cols(); ++j) {
            out << (j == 0 ? "" : " ") << fmt::format("{:.17g}", gain.K(i, j));
        }
        out << '\n';
    }
}

GainMatrix read_gains(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) {
        throw GainFormatError("gain file is empty");
    }
    std::istringstream header(line);
    std::string tag;
    GainDims dims;
    if (!(header >> tag >> dims.n_c >> dims.n_u >> dims.n_y >> dims.n_delays) || tag != "dims" || dims.n_c < 0 ||
        dims.n_u < 1 || dims.n_y < 1 || dims.n_delays < 1) {
        throw GainFormatError("first line must be 'dims <n_c> <n_u> <n_y> <n_delays>'");
    }
    GainMatrix gain = GainMatrix::zero(dims);
    for (Eigen::Index i = 0; i < gain.K.rows(); ++i) {
        if (!std::getline(in, line)) {
            throw GainFormatError(fmt::format("expected {} rows, found {}", gain.K.rows(), i));
        }
        std::istringstream row(line);
        for (Eigen::Index j = 0; j < gain.K.cols(); ++j) {
            if (!(row >> gain.K(i, j))) {
                throw GainFormatError(fmt::format("row {} has fewer than {} entries", i + 1, gain.K.cols()));
            }
        }
        std::string extra;
        if (row >> extra) {
            throw GainFormatError(fmt::format("row {} has more than {} entries", i + 1, gain.K.cols()));
        }
    }
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") != std::string::npos) {
            throw GainFormatError("unexpected content after the last row");
        }
    }
    if (!gain.K.allFinite()) {
        throw GainFormatError("gains must be finite");
    }
    return gain;
}

void save_gains(const std::filesystem::path& path, const GainMatrix& gain) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw GainFormatError(fmt::format("cannot write '{}'", path.string()));
    }
    write_gains(out, gain);
}

GainMatrix load_gains(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw GainFormatError(fmt::format("cannot read gain file '{}'", path.string()));
    }
    return read_gains(in);
}

} // namespace delayvib::cli
