#include "waml/model.hpp"

namespace waml {

std::string checkpoint_config_echo(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open '" + path + "'");
  char magic[8];
  read_bytes(is, magic, 8);
  if (std::memcmp(magic, detail::kCkptMagic, 8) != 0) {
    throw DataError("'" + path + "' is not a checkpoint");
  }
  if (read_u32(is) != detail::kCkptVersion) throw DataError("unsupported checkpoint version");
  return read_string(is);
}

}  // namespace waml
