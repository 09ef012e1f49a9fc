#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace css {

/// The ten condensed discourse classes.
enum class DialogueAct : std::uint8_t {
  Accept,
  NonOpinionated,
  Backchannel,
  Opinionated,
  Question,
  Summarize,
  Reject,
  Conventional,
  NonVerbal,
  Other,
};

inline constexpr std::size_t kNumDialogueActs = 10;

inline constexpr std::array<std::string_view, kNumDialogueActs> kDialogueActNames = {
    "Accept", "NonOpinionated", "Backchannel", "Opinionated", "Question",
    "Summarize", "Reject", "Conventional", "NonVerbal", "Other"};

inline std::string_view act_name(DialogueAct act) { return kDialogueActNames[static_cast<std::size_t>(act)]; }

inline DialogueAct act_from_index(std::size_t i) { return static_cast<DialogueAct>(i); }

inline std::size_t act_index(DialogueAct act) { return static_cast<std::size_t>(act); }

std::optional<DialogueAct> parse_act(std::string_view name);

/// Raw SwDA tag -> condensed class. Lookup tries the exact tag, then the tag
/// with trailing "^x" modifiers removed; anything else is Other.
class TagMapping {
 public:
  /// The table shipped in data/swda_tag_map.tsv.
  static TagMapping defaults();

  /// Lines `raw_tag<TAB>ClassName`; `#` starts a comment. Throws IoError for
  /// unreadable files and ConfigError for unknown class names.
  static TagMapping load(const std::filesystem::path& path);
  static TagMapping parse(std::istream& in, const std::string& source);

  DialogueAct condense(std::string_view raw_tag) const;

  void set(std::string raw_tag, DialogueAct act) { table_[std::move(raw_tag)] = act; }
  const std::map<std::string, DialogueAct>& entries() const { return table_; }

 private:
  std::map<std::string, DialogueAct> table_;
};

}  // namespace css
