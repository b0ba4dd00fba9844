#include "shine/checkpoint.hpp"

#include <cstdint>
#include <istream>
#include <ostream>

#include "shine/errors.hpp"

namespace shine {

namespace {

constexpr char kMagic[8] = {'S', 'H', 'I', 'N', 'E', 'C', 'K', '1'};

void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw IoError("checkpoint: truncated file");
  return v;
}

void write_string(std::ostream& out, const std::string& s) {
  write_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
  std::uint64_t n = read_u64(in);
  if (n > (1ull << 32)) throw IoError("checkpoint: implausible string length");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw IoError("checkpoint: truncated file");
  return s;
}

}  // namespace

void write_parameter_file(std::ostream& out, const std::string& header,
                          const std::vector<Parameter*>& params) {
  out.write(kMagic, sizeof(kMagic));
  write_string(out, header);
  write_u64(out, params.size());
  for (const Parameter* p : params) {
    write_string(out, p->name);
    write_u64(out, static_cast<std::uint64_t>(p->value.rows()));
    write_u64(out, static_cast<std::uint64_t>(p->value.cols()));
    out.write(reinterpret_cast<const char*>(p->value.data()),
              static_cast<std::streamsize>(p->value.size() * sizeof(double)));
  }
  if (!out) throw IoError("checkpoint: write failed");
}

ParameterFile read_parameter_file(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::string(magic, 8) != std::string(kMagic, 8))
    throw IoError("checkpoint: bad magic (not a checkpoint file?)");
  ParameterFile file;
  file.header = read_string(in);
  std::uint64_t count = read_u64(in);
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name = read_string(in);
    int rows = static_cast<int>(read_u64(in));
    int cols = static_cast<int>(read_u64(in));
    Tensor t(rows, cols);
    in.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!in) throw IoError("checkpoint: truncated tensor data for " + name);
    file.tensors.emplace_back(std::move(name), std::move(t));
  }
  return file;
}

void assign_parameters(const ParameterFile& file, const std::vector<Parameter*>& params) {
  if (file.tensors.size() != params.size())
    throw ValidationError("checkpoint: has " + std::to_string(file.tensors.size()) +
                          " tensors, model expects " + std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& [name, tensor] = file.tensors[i];
    if (name != params[i]->name)
      throw ValidationError("checkpoint: parameter order mismatch at " + name);
    if (!tensor.same_shape(params[i]->value))
      throw ValidationError("checkpoint: shape mismatch for " + name + ": file " +
                            tensor.shape_str() + " vs model " + params[i]->value.shape_str());
    params[i]->value = tensor;
  }
}

}  // namespace shine
