#pragma once

#include "delayvib/model.hpp"

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>

namespace delayvib::cli {

class GainFormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Text format:
//   dims <n_c> <n_u> <n_y> <n_delays>
//   one line per row of K, entries printed with %.17g
void write_gains(std::ostream& out, const GainMatrix& gain);
GainMatrix read_gains(std::istream& in);

void save_gains(const std::filesystem::path& path, const GainMatrix& gain);
GainMatrix load_gains(const std::filesystem::path& path);

} // namespace delayvib::cli
