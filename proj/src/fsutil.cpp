#include <contribsum/error.hpp>
#include <contribsum/fsutil.hpp>

#include <atomic>
#include <fstream>
#include <sstream>
#include <thread>

#include <unistd.h>

namespace fs = std::filesystem;

namespace contribsum {

std::string read_file(const fs::path& source) {
    std::ifstream in(source, std::ios::binary);
    if (!in) throw IoError("cannot read " + source.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::move(ss).str();
}

std::optional<std::string> try_read_file(const fs::path& source) {
    std::error_code ec;
    if (!fs::is_regular_file(source, ec)) return std::nullopt;
    return read_file(source);
}

void write_file_atomic(const fs::path& destination, std::string_view bytes) {
    static std::atomic<unsigned> counter{0};
    std::error_code ec;
    if (destination.has_parent_path()) {
        fs::create_directories(destination.parent_path(), ec);
        if (ec) throw IoError("cannot create " + destination.parent_path().string() + ": " + ec.message());
    }
    auto tmp = destination;
    tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) throw IoError("short write to " + tmp.string());
    }
    fs::rename(tmp, destination, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw IoError("cannot replace " + destination.string());
    }
}

}  // namespace contribsum
