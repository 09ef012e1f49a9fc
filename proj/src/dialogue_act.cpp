#include "css/dialogue_act.hpp"

#include <fstream>
#include <sstream>

#include "css/errors.hpp"

namespace css {

namespace {

std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

// Keep in sync with data/swda_tag_map.tsv (a unit test compares them).
constexpr const char* kDefaultTable = R"(# SwDA DAMSL tag -> condensed dialogue act class.
# Format: raw_tag<TAB>ClassName. Unlisted tags condense to Other.
aa	Accept
aap_am	Accept
na	Accept
ny	Accept
sd	NonOpinionated
sd^e	NonOpinionated
ad	NonOpinionated
oo_co_cc	NonOpinionated
b	Backchannel
bk	Backchannel
bh	Backchannel
ba	Backchannel
sv	Opinionated
sv^e	Opinionated
qy	Question
qw	Question
qy^d	Question
qw^d	Question
qo	Question
qh	Question
qrr	Question
^g	Question
bf	Summarize
^h	Summarize
b^m	Summarize
^2	Summarize
ar	Reject
nn	Reject
arp_nd	Reject
ng	Reject
fc	Conventional
fp	Conventional
ft	Conventional
fa	Conventional
fo_o_fw_"_by_bc	Conventional
x	NonVerbal
)";

}  // namespace

std::optional<DialogueAct> parse_act(std::string_view name) {
  for (std::size_t i = 0; i < kNumDialogueActs; ++i) {
    if (kDialogueActNames[i] == name) return act_from_index(i);
  }
  return std::nullopt;
}

TagMapping TagMapping::defaults() {
  std::istringstream in(kDefaultTable);
  return parse(in, "<built-in>");
}

TagMapping TagMapping::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open tag mapping file " + path.string());
  return parse(in, path.string());
}

TagMapping TagMapping::parse(std::istream& in, const std::string& source) {
  TagMapping m;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view view = line;
    if (auto hash = view.find('#'); hash != std::string_view::npos && trim(view.substr(0, hash)).empty()) continue;
    if (trim(view).empty()) continue;
    const auto tab = view.find('\t');
    if (tab == std::string_view::npos) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": expected raw_tag<TAB>ClassName");
    }
    const auto raw = trim(view.substr(0, tab));
    const auto cls = trim(view.substr(tab + 1));
    auto act = parse_act(cls);
    if (!act) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": unknown dialogue act class '" + std::string(cls) +
                        "'");
    }
    if (raw.empty()) throw ConfigError(source + ":" + std::to_string(lineno) + ": empty raw tag");
    m.set(std::string(raw), *act);
  }
  return m;
}

DialogueAct TagMapping::condense(std::string_view raw_tag) const {
  std::string tag(trim(raw_tag));
  if (auto it = table_.find(tag); it != table_.end()) return it->second;
  // Strip trailing "^x" modifiers one at a time: "sd^e^r" -> "sd^e" -> "sd".
  while (true) {
    const auto caret = tag.rfind('^');
    if (caret == std::string::npos || caret == 0) break;
    tag.resize(caret);
    if (auto it = table_.find(tag); it != table_.end()) return it->second;
  }
  return DialogueAct::Other;
}

}  // namespace css
