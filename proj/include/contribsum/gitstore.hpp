#pragma once

// Minimal reader/writer for the git on-disk format: loose objects, pack
// files (idx v2, OFS/REF deltas), loose refs and packed-refs. Only what the
// pipeline needs; no index, no working-tree operations.

#include <contribsum/timeutil.hpp>

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace contribsum::git {

namespace fs = std::filesystem;

/// 40 lowercase hex characters.
using ObjectId = std::string;

bool is_object_id(std::string_view s) noexcept;

enum class ObjectType { commit = 1, tree = 2, blob = 3, tag = 4 };

std::string_view type_name(ObjectType t);

struct RawObject {
    ObjectType type;
    std::string data;
};

struct TreeEntry {
    std::string mode;  // "100644", "100755", "120000", "40000", "160000"
    std::string name;
    ObjectId id;

    bool is_tree() const noexcept { return mode == "40000"; }
    bool is_submodule() const noexcept { return mode == "160000"; }
};

struct Signature {
    std::string name;
    std::string email;
    UtcTime when;
    std::string tz = "+0000";
};

struct CommitObject {
    ObjectId tree;
    std::vector<ObjectId> parents;
    Signature author;
    Signature committer;
    std::string message;
};

std::vector<TreeEntry> parse_tree(std::string_view data);
/// Sorts entries in git order (trees compare as "name/") before encoding.
std::string serialize_tree(std::vector<TreeEntry> entries);

CommitObject parse_commit(std::string_view data);
std::string serialize_commit(const CommitObject& commit);

/// Object id of `data` stored as an object of type `type`.
ObjectId hash_object(ObjectType type, std::string_view data);

class PackFile;

/// Read access to a repository's git directory. Thread-safe for concurrent
/// readers; internal caches are guarded.
class ObjectStore {
public:
    explicit ObjectStore(fs::path git_dir);
    ~ObjectStore();
    ObjectStore(const ObjectStore&) = delete;
    ObjectStore& operator=(const ObjectStore&) = delete;

    const fs::path& git_dir() const noexcept { return git_dir_; }

    /// nullopt when the object does not exist; throws CorruptObject on a
    /// present but undecodable object.
    std::optional<RawObject> read(const ObjectId& id) const;
    bool contains(const ObjectId& id) const;

    /// Resolves a full ref name ("HEAD", "refs/heads/main"), following
    /// symbolic refs. nullopt when absent.
    std::optional<ObjectId> resolve_ref(std::string_view name) const;

    /// Target of a symbolic ref ("HEAD" -> "refs/heads/main"), if symbolic.
    std::optional<std::string> symbolic_target(std::string_view name) const;

    /// All ref names (loose and packed) under `prefix`, sorted.
    std::vector<std::string> list_refs(std::string_view prefix) const;

private:
    std::optional<std::string> read_ref_file(std::string_view name) const;
    void load_packs() const;

    fs::path git_dir_;
    mutable std::mutex mutex_;
    mutable bool packs_loaded_ = false;
    mutable std::vector<std::unique_ptr<PackFile>> packs_;
    mutable std::map<std::string, ObjectId> packed_refs_;
    mutable std::unordered_map<ObjectId, std::shared_ptr<const RawObject>> cache_;
    mutable std::size_t cache_bytes_ = 0;
};

/// Writes loose objects and refs; used by the fixture generator.
class ObjectWriter {
public:
    /// Initializes a bare-layout git directory at `git_dir` if needed.
    explicit ObjectWriter(fs::path git_dir);

    ObjectId write(ObjectType type, std::string_view data);
    void set_ref(const std::string& name, const ObjectId& id);
    void set_symbolic_ref(const std::string& name, const std::string& target);

private:
    fs::path git_dir_;
};

/// zlib helpers shared by reader and writer.
std::string zlib_deflate(std::string_view data);
/// Inflates one zlib stream starting at `input`; `consumed` receives the
/// compressed byte count when non-null.
std::string zlib_inflate(std::string_view input, std::size_t expected_size, std::size_t* consumed = nullptr);

}  // namespace contribsum::git
