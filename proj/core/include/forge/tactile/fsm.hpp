#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "forge/tactile/trace.hpp"

namespace forge::tactile {

class FsmError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class CommandKind { FingerFlex, FingerExtend, FingerAbduct, WristRotate, ArmMove, Hold, Done };
std::string_view to_string(CommandKind k);

struct ActuatorCommand {
  CommandKind kind = CommandKind::Hold;
  double magnitude = 0;
  std::string target;

  friend bool operator==(const ActuatorCommand&, const ActuatorCommand&) = default;
};

enum class Outcome { Success, Rejected, Timeout };
std::string_view to_string(Outcome o);

enum class Cmp { Ge, Gt, Le, Lt };

/// Left side of a guard comparison.
struct Quantity {
  enum class Kind { PMax, Max, Min, Count, Steps, Wrist, Event, Var };
  Kind kind = Kind::Steps;
  std::vector<std::string> args;
  std::string text;
};

/// `lhs op rhs`; rhs is a number or a declared threshold, param or var.
struct Atom {
  Quantity lhs;
  Cmp op = Cmp::Ge;
  std::string rhs;
  std::optional<double> literal;
};

struct Update {
  std::string var;
  bool add = false;
  double value = 0;
};

struct Transition {
  std::string from;
  std::string to;
  /// Conjunction; empty means always.
  std::vector<Atom> guard;
  ActuatorCommand command;
  std::vector<Update> updates;
  std::size_t line = 0;
};

struct StateDecl {
  std::string name;
  std::optional<Outcome> terminal;
};

struct FsmSpec {
  std::string name;
  std::vector<std::string> notes;
  std::vector<std::string> patches;
  /// Pressure thresholds; they scale with the trace.
  std::map<std::string, double> thresholds;
  /// Step counts and other unitless constants.
  std::map<std::string, double> params;
  std::map<std::string, double> vars;
  std::vector<StateDecl> states;
  std::string initial;
  std::vector<Transition> transitions;

  static FsmSpec parse(std::string_view text);
  static FsmSpec load(const std::filesystem::path& path);
  std::string to_text() const;

  const StateDecl& state(std::string_view name) const;
  bool is_terminal(std::string_view name) const;
  void set_threshold(const std::string& name, double value);
  /// Throws FsmError for undeclared symbols or two transitions out of one
  /// state whose guards are not provably exclusive.
  void validate() const;
};

struct FsmRuntime {
  std::string state;
  long steps_in_state = 0;
  double wrist = 0;
  std::map<std::string, double> vars;

  static FsmRuntime start(const FsmSpec& spec);
};

struct StepResult {
  FsmRuntime next;
  ActuatorCommand command;
  /// Index of the transition that fired, if any.
  std::optional<std::size_t> transition;
};

/// Fires the one satisfied transition out of the current state, or holds.
StepResult step_fsm(const FsmSpec& spec, const FsmRuntime& runtime, const ProcessedFrame& frame);

struct TaskLog {
  std::vector<long> frame_steps;
  /// State after each processed frame.
  std::vector<std::string> states;
  std::vector<ActuatorCommand> commands;
  std::vector<double> wrist;
  Outcome outcome = Outcome::Timeout;
  std::string final_state;

  /// Frame step at which `state` was first entered.
  std::optional<long> entered(std::string_view state) const;
  std::string to_text() const;
};

TaskLog run_task(const FsmSpec& spec, const std::vector<ProcessedFrame>& frames, std::size_t max_steps);

/// Bundled FSMs live in <data>/fsm/<name>.fsm.
std::vector<std::string> bundled_fsm_names();

}  // namespace forge::tactile
