#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "forge/deform/cage.hpp"
#include "forge/grammar/engine.hpp"
#include "forge/grammar/script.hpp"
#include "forge/knit/program.hpp"
#include "forge/meshkit/library.hpp"
#include "forge/tactile/fsm.hpp"

namespace forge::service {

/// Maps onto the HTTP statuses: Invalid 400, NotFound 404, Conflict 409,
/// Rejected 422. Version and Corrupt come from session files.
class SessionError : public std::runtime_error {
 public:
  enum class Kind { Invalid, NotFound, Conflict, Rejected, Version, Corrupt };
  SessionError(Kind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

inline constexpr int kSessionFormatVersion = 1;

/// Ruleset and component library shared read-only by every session.
struct Workspace {
  std::string ruleset_ref;
  grammar::RuleSet rules;
  meshkit::ComponentLibrary library;

  /// `ref` is "default" (the bundled ruleset) or a path to a ruleset file;
  /// the library is the bundled one.
  static std::shared_ptr<const Workspace> load(const std::string& ref = "default");
};

struct SensorPatch {
  std::string name;
  knit::KnitRegion region;
  knit::Gauge gauge;
  /// (course, wale) of every sensor, ascending.
  std::vector<std::pair<int, int>> sensors;
  knit::StitchMesh mesh;
};

struct FsmBinding {
  std::string name;
  std::map<std::string, double> thresholds;
};

class DesignSession {
 public:
  static DesignSession create(std::string id, std::shared_ptr<const Workspace> workspace);

  const std::string& id() const { return id_; }
  std::uint64_t revision() const { return revision_; }
  const Workspace& workspace() const { return *workspace_; }
  const grammar::DesignGraph& design() const { return design_; }
  /// Script of record: every applied step with anchor and rotation resolved.
  const grammar::Script& script() const { return script_; }
  const deform::CageAssembly& cage() const { return cage_; }
  const std::map<std::string, SensorPatch>& patches() const { return patches_; }
  const std::optional<FsmBinding>& fsm() const { return fsm_; }

  // Mutations bump the revision by one on success and leave the session
  // untouched when they throw.
  /// Returns the replay log line of the step.
  std::string apply_step(const grammar::ScriptStep& step);
  /// Applies every step of `script`; all or nothing.
  std::vector<std::string> apply_script(const grammar::Script& script);
  deform::EditResult edit_cage(deform::VertexId vertex, const geometry::Vec3& position);
  void reset_cage();
  void define_patch(const std::string& name, const knit::KnitRegion& region, const knit::Gauge& gauge);
  void remove_patch(const std::string& name);
  void place_sensor(const std::string& patch, int course, int wale);
  void remove_sensor(const std::string& patch, int course, int wale);
  void bind_fsm(const FsmBinding& binding);

  deform::DeformedMeshes preview() const;
  std::size_t taxel_count() const;
  /// Hash over the design structure, cage positions, patches and binding.
  std::uint64_t state_hash() const;

  std::string to_json() const;
  static DesignSession from_json(std::string_view text, std::shared_ptr<const Workspace> workspace = nullptr);
  void save(const std::filesystem::path& path) const;
  static DesignSession open(const std::filesystem::path& path, std::shared_ptr<const Workspace> workspace = nullptr);

 private:
  DesignSession() = default;
  void rebuild_patches(std::map<std::string, SensorPatch>& patches, const deform::CageAssembly& cage) const;

  std::string id_;
  std::uint64_t revision_ = 0;
  std::shared_ptr<const Workspace> workspace_;
  grammar::DesignGraph design_;
  grammar::Script script_;
  deform::CageAssembly cage_;
  std::map<std::string, SensorPatch> patches_;
  std::optional<FsmBinding> fsm_;
};

/// Finger chains for patch definitions: for every knuckle, the nodes from the
/// knuckle's child along proximal-port edges to the first tip (b0 at hubs).
std::vector<std::vector<grammar::NodeId>> finger_chains(const grammar::RuleSet& rules, const grammar::DesignGraph& design);

struct ExportedFile {
  std::string name;
  std::string kind;  // stl | knit_h | knit_v | fsm | report
  std::size_t bytes = 0;
  std::uint64_t hash = 0;
};

struct ExportManifest {
  std::vector<ExportedFile> files;
  std::string to_json() const;
  std::size_t count(std::string_view kind) const;
};

struct ExportBundle {
  ExportManifest manifest;
  /// File contents, parallel to manifest.files.
  std::vector<std::string> contents;
};

/// Requires a complete design. One STL per printable part, two knit files per
/// patch, the bound FSM and a text report; hashes are FNV-1a 64 of the bytes.
ExportBundle render_export(const DesignSession& session);
/// Writes the files (those whose kind is in `kinds`, all when empty) and
/// manifest.json into `dir`.
ExportManifest write_export(const ExportBundle& bundle, const std::filesystem::path& dir,
                            const std::vector<std::string>& kinds = {});

tactile::FsmSpec load_bound_fsm(const FsmBinding& binding);

// JSON renderings shared by the CLI and the HTTP API.
std::string session_json(const DesignSession& session);
std::string task_log_json(const tactile::TaskLog& log);

}  // namespace forge::service
