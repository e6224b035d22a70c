#include "lipbench/common/container.hpp"

#include <fstream>
#include <sstream>

namespace lipbench {

void write_container(const std::string& path, const std::string& magic, int version, Json header,
                     const std::string& payload) {
  header["payload_bytes"] = payload.size();
  header["payload_fnv1a64"] = hex64(fnv1a64(payload.data(), payload.size()));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << magic << ' ' << version << '\n' << header.dump() << '\n';
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw DataError("write failed for '" + path + "'");
}

Container read_container(const std::string& path, const std::string& magic, int version) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string bytes = ss.str();

  const auto first_nl = bytes.find('\n');
  if (first_nl == std::string::npos) throw DataError(path + ": missing format line");
  std::istringstream first(bytes.substr(0, first_nl));
  std::string got_magic;
  int got_version = -1;
  first >> got_magic >> got_version;
  if (got_magic != magic) throw DataError(path + ": not a " + magic + " file");
  if (got_version != version) {
    throw DataError(path + ": format version " + std::to_string(got_version) + " unsupported (expected " +
                    std::to_string(version) + ")");
  }
  const auto second_nl = bytes.find('\n', first_nl + 1);
  if (second_nl == std::string::npos) throw DataError(path + ": truncated header");
  Container c;
  try {
    c.header = Json::parse(bytes.substr(first_nl + 1, second_nl - first_nl - 1));
  } catch (const Json::exception& e) {
    throw DataError(path + ": corrupt header (" + e.what() + ")");
  }
  c.payload = bytes.substr(second_nl + 1);
  std::size_t expected = 0;
  std::string checksum;
  try {
    expected = c.header.at("payload_bytes").get<std::size_t>();
    checksum = c.header.at("payload_fnv1a64").get<std::string>();
  } catch (const Json::exception& e) {
    throw DataError(path + ": header lacks payload fields (" + e.what() + ")");
  }
  if (c.payload.size() != expected) {
    throw DataError(path + ": truncated payload (" + std::to_string(c.payload.size()) + " of " +
                    std::to_string(expected) + " bytes)");
  }
  if (hex64(fnv1a64(c.payload.data(), c.payload.size())) != checksum) {
    throw DataError(path + ": payload checksum mismatch");
  }
  return c;
}

}  // namespace lipbench
