#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "shine/autodiff.hpp"

namespace shine {

// Versioned binary container of named tensors. Values are stored as raw
// little-endian doubles, so a round-trip is bit-exact. An arbitrary metadata
// string (header) travels with the parameters.
void write_parameter_file(std::ostream& out, const std::string& header,
                          const std::vector<Parameter*>& params);

struct ParameterFile {
  std::string header;
  std::vector<std::pair<std::string, Tensor>> tensors;
};

ParameterFile read_parameter_file(std::istream& in);

// Loads values into an existing parameter list; names and shapes must match
// exactly.
void assign_parameters(const ParameterFile& file, const std::vector<Parameter*>& params);

}  // namespace shine
