#pragma once

#include <string>

#include "hetreg/matrix.hpp"

namespace hetreg {

/// Strict rectangular numeric CSV. Malformed cells raise ParseError with a
/// 1-based row/column location; rows are counted including the header.
Matrix load_csv(const std::string &path, bool has_header);

/// Writes with 17 significant digits so a round trip is lossless.
void write_csv(const std::string &path, const Matrix &m, const std::string &header = "");

} // namespace hetreg
