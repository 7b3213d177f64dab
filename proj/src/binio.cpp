#include "binio.hpp"

#include <fstream>

namespace ecinn::binio {

std::string read_file(const std::string& path, const std::string& what) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError(what + ": cannot open " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw FormatError(what + ": read error on " + path);
    return bytes;
}

void write_file(const std::string& path, std::string_view bytes, const std::string& what) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError(what + ": cannot open " + path + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError(what + ": write error on " + path);
}

}  // namespace ecinn::binio
