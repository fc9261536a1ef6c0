#include <contribsum/digest.hpp>
#include <contribsum/error.hpp>
#include <contribsum/fsutil.hpp>
#include <contribsum/gitstore.hpp>

#include <zlib.h>

#include <algorithm>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

namespace contribsum::git {

namespace {

std::string trim_right(std::string s) {
    while (!s.empty() && (s.back() == '\n' || s.back() == '\r' || s.back() == ' ')) s.pop_back();
    return s;
}

std::uint32_t be32(const unsigned char* p) {
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) | (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

std::uint64_t be64(const unsigned char* p) { return (std::uint64_t(be32(p)) << 32) | be32(p + 4); }

ObjectType type_from_name(std::string_view name) {
    if (name == "commit") return ObjectType::commit;
    if (name == "tree") return ObjectType::tree;
    if (name == "blob") return ObjectType::blob;
    if (name == "tag") return ObjectType::tag;
    throw CorruptObject("unknown object type: " + std::string(name));
}

std::string apply_delta(std::string_view base, std::string_view delta) {
    std::size_t pos = 0;
    auto varint = [&]() {
        std::uint64_t value = 0;
        int shift = 0;
        while (true) {
            if (pos >= delta.size()) throw CorruptObject("truncated delta header");
            auto b = static_cast<unsigned char>(delta[pos++]);
            value |= std::uint64_t(b & 0x7f) << shift;
            shift += 7;
            if (!(b & 0x80)) break;
        }
        return value;
    };
    const auto src_size = varint();
    const auto dst_size = varint();
    if (src_size != base.size()) throw CorruptObject("delta base size mismatch");
    std::string out;
    out.reserve(dst_size);
    while (pos < delta.size()) {
        auto op = static_cast<unsigned char>(delta[pos++]);
        if (op & 0x80) {
            std::uint64_t offset = 0;
            std::uint64_t size = 0;
            for (int i = 0; i < 4; ++i) {
                if (op & (1u << i)) offset |= std::uint64_t(static_cast<unsigned char>(delta.at(pos++))) << (8 * i);
            }
            for (int i = 0; i < 3; ++i) {
                if (op & (0x10u << i)) size |= std::uint64_t(static_cast<unsigned char>(delta.at(pos++))) << (8 * i);
            }
            if (size == 0) size = 0x10000;
            if (offset + size > base.size()) throw CorruptObject("delta copy out of range");
            out.append(base.substr(offset, size));
        } else if (op != 0) {
            if (pos + op > delta.size()) throw CorruptObject("delta insert out of range");
            out.append(delta.substr(pos, op));
            pos += op;
        } else {
            throw CorruptObject("reserved delta opcode");
        }
    }
    if (out.size() != dst_size) throw CorruptObject("delta result size mismatch");
    return out;
}

}  // namespace

bool is_object_id(std::string_view s) noexcept {
    return s.size() == 40 &&
           std::all_of(s.begin(), s.end(), [](char c) { return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'); });
}

std::string_view type_name(ObjectType t) {
    switch (t) {
        case ObjectType::commit: return "commit";
        case ObjectType::tree: return "tree";
        case ObjectType::blob: return "blob";
        case ObjectType::tag: return "tag";
    }
    return "unknown";
}

std::string zlib_deflate(std::string_view data) {
    uLongf bound = compressBound(static_cast<uLong>(data.size()));
    std::string out(bound, '\0');
    if (compress2(reinterpret_cast<Bytef*>(out.data()), &bound, reinterpret_cast<const Bytef*>(data.data()),
                  static_cast<uLong>(data.size()), Z_BEST_SPEED) != Z_OK) {
        throw Error("zlib compression failed");
    }
    out.resize(bound);
    return out;
}

std::string zlib_inflate(std::string_view input, std::size_t expected_size, std::size_t* consumed) {
    z_stream zs{};
    if (inflateInit(&zs) != Z_OK) throw CorruptObject("inflateInit failed");
    std::string out(expected_size > 0 ? expected_size : std::max<std::size_t>(input.size() * 4, 64), '\0');
    zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(input.data()));
    zs.avail_in = static_cast<uInt>(input.size());
    int rc = Z_OK;
    std::size_t produced = 0;
    while (rc != Z_STREAM_END) {
        if (produced == out.size()) out.resize(out.size() * 2 + 1);
        zs.next_out = reinterpret_cast<Bytef*>(out.data() + produced);
        zs.avail_out = static_cast<uInt>(out.size() - produced);
        rc = inflate(&zs, Z_NO_FLUSH);
        produced = out.size() - zs.avail_out;
        if (rc == Z_STREAM_END) break;
        if (rc != Z_OK && !(rc == Z_BUF_ERROR && zs.avail_out == 0)) {
            inflateEnd(&zs);
            throw CorruptObject("zlib stream is corrupt");
        }
        if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
            inflateEnd(&zs);
            throw CorruptObject("truncated zlib stream");
        }
    }
    if (consumed) *consumed = zs.total_in;
    inflateEnd(&zs);
    out.resize(produced);
    return out;
}

ObjectId hash_object(ObjectType type, std::string_view data) {
    std::string full = std::string(type_name(type)) + ' ' + std::to_string(data.size());
    full.push_back('\0');
    full.append(data);
    return sha1_hex(full);
}

std::vector<TreeEntry> parse_tree(std::string_view data) {
    std::vector<TreeEntry> entries;
    std::size_t pos = 0;
    while (pos < data.size()) {
        auto sp = data.find(' ', pos);
        auto nul = data.find('\0', sp == std::string_view::npos ? pos : sp);
        if (sp == std::string_view::npos || nul == std::string_view::npos || nul + 21 > data.size()) {
            throw CorruptObject("malformed tree object");
        }
        TreeEntry e;
        e.mode = std::string(data.substr(pos, sp - pos));
        e.name = std::string(data.substr(sp + 1, nul - sp - 1));
        e.id = to_hex(data.substr(nul + 1, 20));
        entries.push_back(std::move(e));
        pos = nul + 21;
    }
    return entries;
}

std::string serialize_tree(std::vector<TreeEntry> entries) {
    auto key = [](const TreeEntry& e) { return e.is_tree() ? e.name + "/" : e.name; };
    std::sort(entries.begin(), entries.end(), [&](const TreeEntry& a, const TreeEntry& b) { return key(a) < key(b); });
    std::string out;
    for (const auto& e : entries) {
        out += e.mode;
        out += ' ';
        out += e.name;
        out.push_back('\0');
        out += from_hex(e.id);
    }
    return out;
}

namespace {

Signature parse_signature(std::string_view text) {
    auto lt = text.find('<');
    auto gt = text.rfind('>');
    if (lt == std::string_view::npos || gt == std::string_view::npos || gt < lt) {
        throw CorruptObject("malformed signature: " + std::string(text));
    }
    Signature sig;
    auto name = text.substr(0, lt);
    while (!name.empty() && name.back() == ' ') name.remove_suffix(1);
    sig.name = std::string(name);
    sig.email = std::string(text.substr(lt + 1, gt - lt - 1));
    auto rest = text.substr(gt + 1);
    while (!rest.empty() && rest.front() == ' ') rest.remove_prefix(1);
    std::int64_t seconds = 0;
    auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), seconds);
    if (ec != std::errc()) throw CorruptObject("malformed signature time: " + std::string(text));
    sig.when = from_unix(seconds);
    auto tz = std::string_view(ptr, rest.data() + rest.size() - ptr);
    while (!tz.empty() && tz.front() == ' ') tz.remove_prefix(1);
    if (!tz.empty()) sig.tz = std::string(tz);
    return sig;
}

std::string format_signature(const Signature& s) {
    return s.name + " <" + s.email + "> " + std::to_string(to_unix(s.when)) + " " + s.tz;
}

}  // namespace

CommitObject parse_commit(std::string_view data) {
    CommitObject c;
    std::size_t pos = 0;
    bool have_author = false;
    while (pos < data.size()) {
        auto eol = data.find('\n', pos);
        if (eol == std::string_view::npos) eol = data.size();
        auto line = data.substr(pos, eol - pos);
        pos = eol + 1;
        if (line.empty()) {
            c.message = pos <= data.size() ? std::string(data.substr(pos)) : std::string();
            break;
        }
        if (line.front() == ' ') continue;  // continuation of a multi-line header (gpgsig, mergetag)
        auto sp = line.find(' ');
        auto key = line.substr(0, sp);
        auto value = sp == std::string_view::npos ? std::string_view() : line.substr(sp + 1);
        if (key == "tree") {
            c.tree = std::string(value);
        } else if (key == "parent") {
            c.parents.emplace_back(value);
        } else if (key == "author") {
            c.author = parse_signature(value);
            have_author = true;
        } else if (key == "committer") {
            c.committer = parse_signature(value);
        }
    }
    if (!is_object_id(c.tree) || !have_author) throw CorruptObject("malformed commit object");
    return c;
}

std::string serialize_commit(const CommitObject& c) {
    std::string out = "tree " + c.tree + "\n";
    for (const auto& p : c.parents) out += "parent " + p + "\n";
    out += "author " + format_signature(c.author) + "\n";
    out += "committer " + format_signature(c.committer) + "\n\n";
    out += c.message;
    return out;
}

// ---------------------------------------------------------------------------
// Pack files

class PackFile {
public:
    PackFile(const fs::path& idx_path, const fs::path& pack_path) : pack_path_(pack_path) {
        idx_ = read_file(idx_path);
        const auto* p = reinterpret_cast<const unsigned char*>(idx_.data());
        if (idx_.size() < 8 + 256 * 4 || std::memcmp(p, "\377tOc", 4) != 0 || be32(p + 4) != 2) {
            throw CorruptObject("unsupported pack index: " + idx_path.string());
        }
        count_ = be32(p + 8 + 255 * 4);
        if (idx_.size() < 8 + 256 * 4 + count_ * (20 + 4 + 4)) throw CorruptObject("truncated pack index");
    }

    std::optional<std::uint64_t> find(const std::string& raw_id) const {
        const auto* p = reinterpret_cast<const unsigned char*>(idx_.data());
        const auto first = static_cast<unsigned char>(raw_id[0]);
        std::uint32_t lo = first == 0 ? 0 : be32(p + 8 + (first - 1) * 4);
        std::uint32_t hi = be32(p + 8 + first * 4);
        const unsigned char* names = p + 8 + 256 * 4;
        while (lo < hi) {
            auto mid = lo + (hi - lo) / 2;
            int cmp = std::memcmp(names + mid * 20, raw_id.data(), 20);
            if (cmp == 0) return offset_at(mid);
            if (cmp < 0) lo = mid + 1;
            else hi = mid;
        }
        return std::nullopt;
    }

    /// Reads the object at `offset`; REF_DELTA bases are resolved through `store`.
    RawObject read_at(std::uint64_t offset, const ObjectStore& store) const {
        ensure_loaded();
        if (offset >= pack_.size()) throw CorruptObject("pack offset out of range");
        const auto* p = reinterpret_cast<const unsigned char*>(pack_.data());
        std::size_t pos = offset;
        unsigned char c = p[pos++];
        int type = (c >> 4) & 7;
        std::uint64_t size = c & 15;
        int shift = 4;
        while (c & 0x80) {
            if (pos >= pack_.size()) throw CorruptObject("truncated pack entry");
            c = p[pos++];
            size |= std::uint64_t(c & 0x7f) << shift;
            shift += 7;
        }
        auto body = std::string_view(pack_).substr(pos);
        if (type >= 1 && type <= 4) {
            return RawObject{static_cast<ObjectType>(type), zlib_inflate(body, size)};
        }
        if (type == 6) {  // OFS_DELTA
            std::size_t q = 0;
            auto b = static_cast<unsigned char>(body.at(q++));
            std::uint64_t rel = b & 0x7f;
            while (b & 0x80) {
                b = static_cast<unsigned char>(body.at(q++));
                rel = ((rel + 1) << 7) | (b & 0x7f);
            }
            if (rel > offset) throw CorruptObject("OFS_DELTA base before pack start");
            RawObject base = read_at(offset - rel, store);
            auto delta = zlib_inflate(body.substr(q), size);
            return RawObject{base.type, apply_delta(base.data, delta)};
        }
        if (type == 7) {  // REF_DELTA
            if (body.size() < 20) throw CorruptObject("truncated REF_DELTA");
            auto base_id = to_hex(body.substr(0, 20));
            auto base = store.read(base_id);
            if (!base) throw CorruptObject("missing REF_DELTA base " + base_id);
            auto delta = zlib_inflate(body.substr(20), size);
            return RawObject{base->type, apply_delta(base->data, delta)};
        }
        throw CorruptObject("unknown pack entry type " + std::to_string(type));
    }

private:
    std::uint64_t offset_at(std::uint32_t index) const {
        const auto* p = reinterpret_cast<const unsigned char*>(idx_.data());
        const unsigned char* offsets = p + 8 + 256 * 4 + std::size_t(count_) * 24;
        std::uint32_t off = be32(offsets + index * 4);
        if (!(off & 0x80000000u)) return off;
        const unsigned char* large = offsets + std::size_t(count_) * 4;
        return be64(large + std::size_t(off & 0x7fffffffu) * 8);
    }

    void ensure_loaded() const {
        std::call_once(loaded_, [this] {
            pack_ = read_file(pack_path_);
            if (pack_.size() < 12 || pack_.compare(0, 4, "PACK") != 0) {
                throw CorruptObject("bad pack header: " + pack_path_.string());
            }
        });
    }

    fs::path pack_path_;
    std::string idx_;
    std::uint32_t count_ = 0;
    mutable std::once_flag loaded_;
    mutable std::string pack_;
};

// ---------------------------------------------------------------------------
// ObjectStore

ObjectStore::ObjectStore(fs::path git_dir) : git_dir_(std::move(git_dir)) {
    if (auto packed = try_read_file(git_dir_ / "packed-refs")) {
        std::istringstream in(*packed);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#' || line[0] == '^') continue;
            auto sp = line.find(' ');
            if (sp == std::string::npos) continue;
            auto id = line.substr(0, sp);
            if (is_object_id(id)) packed_refs_[trim_right(line.substr(sp + 1))] = id;
        }
    }
}

ObjectStore::~ObjectStore() = default;

void ObjectStore::load_packs() const {
    if (packs_loaded_) return;
    packs_loaded_ = true;
    std::error_code ec;
    auto dir = git_dir_ / "objects" / "pack";
    if (!fs::is_directory(dir, ec)) return;
    std::vector<fs::path> idx_files;
    for (const auto& entry : fs::directory_iterator(dir, ec)) {
        if (entry.path().extension() == ".idx") idx_files.push_back(entry.path());
    }
    std::sort(idx_files.begin(), idx_files.end());
    for (const auto& idx : idx_files) {
        auto pack = idx;
        pack.replace_extension(".pack");
        if (fs::exists(pack, ec)) packs_.push_back(std::make_unique<PackFile>(idx, pack));
    }
}

std::optional<RawObject> ObjectStore::read(const ObjectId& id) const {
    if (!is_object_id(id)) return std::nullopt;
    {
        std::lock_guard lock(mutex_);
        if (auto it = cache_.find(id); it != cache_.end()) return *it->second;
    }
    std::optional<RawObject> result;
    auto loose = git_dir_ / "objects" / id.substr(0, 2) / id.substr(2);
    if (auto compressed = try_read_file(loose)) {
        auto raw = zlib_inflate(*compressed, 0);
        auto sp = raw.find(' ');
        auto nul = raw.find('\0');
        if (sp == std::string::npos || nul == std::string::npos || sp > nul) {
            throw CorruptObject("malformed loose object header: " + id);
        }
        auto type = type_from_name(std::string_view(raw).substr(0, sp));
        std::size_t declared = std::stoull(raw.substr(sp + 1, nul - sp - 1));
        if (declared != raw.size() - nul - 1) throw CorruptObject("loose object size mismatch: " + id);
        result = RawObject{type, raw.substr(nul + 1)};
    } else {
        std::vector<const PackFile*> packs;
        {
            std::lock_guard lock(mutex_);
            load_packs();
            for (const auto& p : packs_) packs.push_back(p.get());
        }
        auto raw_id = from_hex(id);
        for (const auto* pack : packs) {
            if (auto off = pack->find(raw_id)) {
                result = pack->read_at(*off, *this);
                break;
            }
        }
    }
    if (!result) return std::nullopt;
    if (hash_object(result->type, result->data) != id) throw CorruptObject("object hash mismatch: " + id);
    {
        std::lock_guard lock(mutex_);
        if (cache_bytes_ > (std::size_t(256) << 20)) {
            cache_.clear();
            cache_bytes_ = 0;
        }
        cache_bytes_ += result->data.size();
        cache_.emplace(id, std::make_shared<const RawObject>(*result));
    }
    return result;
}

bool ObjectStore::contains(const ObjectId& id) const {
    try {
        return read(id).has_value();
    } catch (const CorruptObject&) {
        return false;
    }
}

std::optional<std::string> ObjectStore::read_ref_file(std::string_view name) const {
    auto content = try_read_file(git_dir_ / std::string(name));
    if (!content) return std::nullopt;
    return trim_right(*content);
}

std::optional<std::string> ObjectStore::symbolic_target(std::string_view name) const {
    auto content = read_ref_file(name);
    if (!content || content->rfind("ref: ", 0) != 0) return std::nullopt;
    return content->substr(5);
}

std::optional<ObjectId> ObjectStore::resolve_ref(std::string_view name) const {
    std::string current(name);
    for (int depth = 0; depth < 10; ++depth) {
        if (auto content = read_ref_file(current)) {
            if (content->rfind("ref: ", 0) == 0) {
                current = content->substr(5);
                continue;
            }
            if (is_object_id(*content)) return *content;
            return std::nullopt;
        }
        if (auto it = packed_refs_.find(current); it != packed_refs_.end()) return it->second;
        return std::nullopt;
    }
    return std::nullopt;
}

std::vector<std::string> ObjectStore::list_refs(std::string_view prefix) const {
    std::vector<std::string> names;
    std::error_code ec;
    auto root = git_dir_ / std::string(prefix);
    if (fs::is_directory(root, ec)) {
        for (auto it = fs::recursive_directory_iterator(root, ec); it != fs::recursive_directory_iterator(); ++it) {
            if (it->is_regular_file()) {
                names.push_back(fs::relative(it->path(), git_dir_).generic_string());
            }
        }
    }
    for (const auto& [name, id] : packed_refs_) {
        if (name.rfind(prefix, 0) == 0) names.push_back(name);
    }
    std::sort(names.begin(), names.end());
    names.erase(std::unique(names.begin(), names.end()), names.end());
    return names;
}

// ---------------------------------------------------------------------------
// ObjectWriter

ObjectWriter::ObjectWriter(fs::path git_dir) : git_dir_(std::move(git_dir)) {
    fs::create_directories(git_dir_ / "objects");
    fs::create_directories(git_dir_ / "refs" / "heads");
    fs::create_directories(git_dir_ / "refs" / "tags");
    if (!fs::exists(git_dir_ / "config")) {
        std::ofstream(git_dir_ / "config", std::ios::binary)
            << "[core]\n\trepositoryformatversion = 0\n\tfilemode = true\n\tbare = true\n";
    }
    if (!fs::exists(git_dir_ / "HEAD")) {
        std::ofstream(git_dir_ / "HEAD", std::ios::binary) << "ref: refs/heads/main\n";
    }
}

ObjectId ObjectWriter::write(ObjectType type, std::string_view data) {
    auto id = hash_object(type, data);
    auto path = git_dir_ / "objects" / id.substr(0, 2) / id.substr(2);
    if (fs::exists(path)) return id;
    fs::create_directories(path.parent_path());
    std::string full = std::string(type_name(type)) + ' ' + std::to_string(data.size());
    full.push_back('\0');
    full.append(data);
    std::ofstream out(path, std::ios::binary);
    auto compressed = zlib_deflate(full);
    out.write(compressed.data(), static_cast<std::streamsize>(compressed.size()));
    if (!out) throw IoError("cannot write object " + path.string());
    return id;
}

void ObjectWriter::set_ref(const std::string& name, const ObjectId& id) {
    auto path = git_dir_ / name;
    fs::create_directories(path.parent_path());
    std::ofstream(path, std::ios::binary | std::ios::trunc) << id << "\n";
}

void ObjectWriter::set_symbolic_ref(const std::string& name, const std::string& target) {
    std::ofstream(git_dir_ / name, std::ios::binary | std::ios::trunc) << "ref: " << target << "\n";
}

}  // namespace contribsum::git
