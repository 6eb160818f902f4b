#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "clis/error.hpp"
#include "clis/scene_graph.hpp"

namespace clis {

enum class PromptRole { description_generator, layout_generator };

struct PromptTemplate {
  PromptRole role = PromptRole::description_generator;
  std::string body;      // full template with {examples} plus the role-specific input slot
  std::string examples;  // in-context block substituted into {examples}

  void validate() const {
    auto requires_slot = [&](std::string_view slot) {
      if (body.find(slot) == std::string::npos)
        fail(ErrorKind::config, "prompt template missing slot " + std::string(slot));
    };
    auto rejects_slot = [&](std::string_view slot) {
      if (body.find(slot) != std::string::npos)
        fail(ErrorKind::config, "prompt template has foreign slot " + std::string(slot));
    };
    requires_slot("{examples}");
    if (role == PromptRole::description_generator) {
      requires_slot("{object_list}");
      rejects_slot("{description}");
    } else {
      requires_slot("{description}");
      rejects_slot("{object_list}");
    }
  }
};

namespace prompt_text {

// Templates the generation clients send. The acceptance suite pins these
// against the checked-in asset files, so edits must land in both places.
inline constexpr std::string_view kDescriptionTemplate =
    "Task Description:\n"
    "Your task is to generate a detailed description based on an object list. The description "
    "should be a structured representation of a scene detailing its various elements and their "
    "relationships. The description consists of: 1. attributes of objects: The attributes should "
    "be descriptive color or texture of the corresponding object. 2. Groups: A group of objects "
    "exhibit strong spatial relationships that interact with each other. 3. Relationships: This "
    "section illustrates the interactions or spatial relationships between various objects or "
    "groups. 4. Caption: Caption should be a simple and straightforward 2-4 sentence image "
    "caption. Please include all the objects in the caption and refer to them in '()'. Create "
    "the caption as if you are directly observing the image. Do not mention the use of any "
    "source data. Do not use words like 'indicate', 'suggest', 'hint', 'likely', or 'possibly'.\n"
    "\n"
    "You can refer to the following examples as references.\n"
    "{examples}\n"
    "\n"
    "Please provide a json format with description based on the following object list.\n"
    "\n"
    "{object_list}\n";

inline constexpr std::string_view kLayoutTemplate =
    "Task Description:\n"
    "Your task is to generate a layout based on a detailed description. The layout is a list of "
    "json with 'object' and 'bbox'. 'object' refers to the object name in the prompt provided, "
    "while 'bbox' is formulated as [x,y,w,h], where \"x,y\" denotes the top left coordinate of "
    "the bounding box. \"w\" denotes the width, and \"h\" denotes the height. The bounding boxes "
    "should not go beyond the image boundaries. The six values \"x,y,w,h,x+w,y+h\" are all "
    "larger than 0 and smaller than 1.\n"
    "\n"
    "You can refer to the following examples as references.\n"
    "{examples}\n"
    "\n"
    "Please provide a json format with Layout based on the following prompt.\n"
    "\n"
    "{description}\n";

inline constexpr std::string_view kDescriptionExamples =
    "Object list: [\"dog\", \"frisbee\"]\n"
    "Description:\n"
    "{\"objects\": [{\"name\": \"dog\", \"attribute\": \"fluffy brown\", \"color\": \"brown\"}, "
    "{\"name\": \"frisbee\", \"attribute\": \"bright red\", \"color\": \"red\"}], \"groups\": "
    "[[\"dog\", \"frisbee\"]], \"relationships\": [{\"subject\": \"dog\", \"relation\": "
    "\"chasing\", \"object\": \"frisbee\"}], \"caption\": \"A fluffy brown (dog) leaps across a "
    "grassy field. It is chasing a bright red (frisbee) floating just ahead of its nose.\"}\n"
    "\n"
    "Object list: [\"cup\", \"laptop\", \"desk\"]\n"
    "Description:\n"
    "{\"objects\": [{\"name\": \"cup\", \"attribute\": \"white ceramic\", \"color\": \"white\"}, "
    "{\"name\": \"laptop\", \"attribute\": \"black\", \"color\": \"black\"}, {\"name\": "
    "\"desk\", \"attribute\": \"wooden\", \"color\": \"brown\"}], \"groups\": [[\"cup\", "
    "\"laptop\", \"desk\"]], \"relationships\": [{\"subject\": \"cup\", \"relation\": \"next "
    "to\", \"object\": \"laptop\"}, {\"subject\": \"laptop\", \"relation\": \"on\", \"object\": "
    "\"desk\"}], \"caption\": \"A black (laptop) sits open on a wooden (desk). A white ceramic "
    "(cup) stands next to the laptop.\"}\n";

inline constexpr std::string_view kLayoutExamples =
    "Description:\n"
    "{\"objects\": [{\"name\": \"dog\", \"attribute\": \"fluffy brown\", \"color\": \"brown\"}, "
    "{\"name\": \"frisbee\", \"attribute\": \"bright red\", \"color\": \"red\"}], \"groups\": "
    "[[\"dog\", \"frisbee\"]], \"relationships\": [{\"subject\": \"dog\", \"relation\": "
    "\"chasing\", \"object\": \"frisbee\"}], \"caption\": \"A fluffy brown (dog) leaps across a "
    "grassy field. It is chasing a bright red (frisbee) floating just ahead of its nose.\"}\n"
    "Layout:\n"
    "[{\"object\": \"dog\", \"bbox\": [0.35, 0.45, 0.3, 0.35]}, {\"object\": \"frisbee\", "
    "\"bbox\": [0.62, 0.25, 0.12, 0.08]}]\n"
    "\n"
    "Description:\n"
    "{\"objects\": [{\"name\": \"cup\", \"attribute\": \"white ceramic\", \"color\": \"white\"}, "
    "{\"name\": \"laptop\", \"attribute\": \"black\", \"color\": \"black\"}, {\"name\": "
    "\"desk\", \"attribute\": \"wooden\", \"color\": \"brown\"}], \"groups\": [[\"cup\", "
    "\"laptop\", \"desk\"]], \"relationships\": [{\"subject\": \"cup\", \"relation\": \"next "
    "to\", \"object\": \"laptop\"}, {\"subject\": \"laptop\", \"relation\": \"on\", \"object\": "
    "\"desk\"}], \"caption\": \"A black (laptop) sits open on a wooden (desk). A white ceramic "
    "(cup) stands next to the laptop.\"}\n"
    "Layout:\n"
    "[{\"object\": \"cup\", \"bbox\": [0.2, 0.5, 0.1, 0.14]}, {\"object\": \"laptop\", \"bbox\": "
    "[0.38, 0.42, 0.3, 0.24]}, {\"object\": \"desk\", \"bbox\": [0.05, 0.6, 0.9, 0.38]}]\n";

}  // namespace prompt_text

class PromptLibrary {
 public:
  static PromptLibrary builtin() {
    PromptLibrary lib;
    lib.description_ = {PromptRole::description_generator,
                        std::string(prompt_text::kDescriptionTemplate),
                        std::string(prompt_text::kDescriptionExamples)};
    lib.layout_ = {PromptRole::layout_generator, std::string(prompt_text::kLayoutTemplate),
                   std::string(prompt_text::kLayoutExamples)};
    lib.description_.validate();
    lib.layout_.validate();
    return lib;
  }

  /// Loads description_generator.txt, layout_generator.txt and the two
  /// *_examples.txt files from a directory.
  static PromptLibrary from_dir(const std::filesystem::path& dir) {
    PromptLibrary lib;
    lib.description_ = {PromptRole::description_generator,
                        read_file(dir / "description_generator.txt"),
                        read_file(dir / "description_examples.txt")};
    lib.layout_ = {PromptRole::layout_generator, read_file(dir / "layout_generator.txt"),
                   read_file(dir / "layout_examples.txt")};
    lib.description_.validate();
    lib.layout_.validate();
    return lib;
  }

  const PromptTemplate& description() const { return description_; }
  const PromptTemplate& layout() const { return layout_; }

 private:
  static std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::io, "cannot open prompt asset: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
  }

  PromptTemplate description_;
  PromptTemplate layout_;
};

namespace detail {

inline std::string replace_slot(std::string text, std::string_view slot, std::string_view value) {
  std::size_t pos = text.find(slot);
  if (pos == std::string::npos)
    fail(ErrorKind::config, "prompt template missing slot " + std::string(slot));
  text.replace(pos, slot.size(), value);
  return text;
}

inline std::string substitute_examples(const PromptTemplate& tpl,
                                       std::vector<std::string>* warnings) {
  if (tpl.examples.empty() && warnings)
    warnings->push_back("prompt examples block is empty");
  // Trim one trailing newline so the block slots in without double spacing.
  std::string block = tpl.examples;
  if (!block.empty() && block.back() == '\n') block.pop_back();
  return replace_slot(tpl.body, "{examples}", block);
}

}  // namespace detail

/// Renders the description request: template text with the in-context block
/// and the object list (as a JSON array) substituted in.
inline std::string render_description_prompt(const PromptLibrary& lib, const ObjectList& list,
                                             std::vector<std::string>* warnings = nullptr) {
  if (list.entries.empty()) fail(ErrorKind::argument, "object list is empty");
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& name : list.entries) arr.push_back(name);
  std::string text = detail::substitute_examples(lib.description(), warnings);
  return detail::replace_slot(std::move(text), "{object_list}", arr.dump());
}

inline std::string render_layout_prompt(const PromptLibrary& lib, const std::string& description,
                                        std::vector<std::string>* warnings = nullptr) {
  if (description.empty()) fail(ErrorKind::argument, "description is empty");
  std::string text = detail::substitute_examples(lib.layout(), warnings);
  return detail::replace_slot(std::move(text), "{description}", description);
}

}  // namespace clis
