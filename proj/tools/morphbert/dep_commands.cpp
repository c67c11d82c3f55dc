#include <iostream>
#include <memory>
#include <optional>

#include "command.hpp"
#include "morphbert/common/tagged_tsv.hpp"
#include "morphbert/conllu.hpp"
#include "morphbert/depcodec.hpp"

namespace morphbert::cli {

namespace {

struct EncodeArgs {
  std::filesystem::path input;
  std::filesystem::path output;
  bool strict = false;
};

void run_dep_encode(const CLI::App& app, const EncodeArgs& a) {
  conllu::Reader reader(a.input);
  auto out = open_output(a.output);
  out << provenance(app, 0).line() << '\n';
  std::size_t sentences = 0;
  std::size_t lifted = 0;
  conllu::Sentence s;
  while (reader.next(s)) {
    if (s.size() == 0) continue;
    ++sentences;
    depcodec::DepTree tree = s.tree();
    if (!depcodec::is_valid_tree(tree)) {
      throw std::runtime_error(a.input.string() + ": sentence ending at line " +
                               std::to_string(reader.line_number()) + " is not a tree");
    }
    if (!depcodec::is_projective(tree)) {
      if (a.strict) {
        throw std::runtime_error(a.input.string() + ": sentence ending at line " +
                                 std::to_string(reader.line_number()) + " is not projective");
      }
      tree = depcodec::projectivize(tree);
      ++lifted;
    }
    TaggedSentence tagged;
    for (std::size_t w = 0; w < s.size(); ++w) tagged.forms.emplace_back(s.form(w));
    for (const auto& chunk : depcodec::encode_labels(tree)) {
      tagged.tags.push_back(depcodec::format_label(chunk));
    }
    write_tagged_sentence(out, tagged);
  }
  if (!out) throw std::runtime_error("failed writing " + a.output.string());
  std::cerr << sentences << " sentences encoded, " << lifted << " projectivized\n";
}

struct DecodeArgs {
  std::filesystem::path input;
  std::filesystem::path output;
  std::filesystem::path templ;
  bool strict = false;
};

void run_dep_decode(const CLI::App& app, const DecodeArgs& a) {
  TaggedReader labels(a.input);
  std::optional<conllu::Reader> templ;
  if (!a.templ.empty()) templ.emplace(a.templ);

  auto out = open_output(a.output);
  out << provenance(app, 0).line() << '\n';
  std::size_t sentences = 0;
  std::size_t dropped = 0;
  TaggedSentence tagged;
  conllu::Sentence base;
  while (labels.next(tagged)) {
    ++sentences;
    depcodec::LabelSequence seq;
    for (const std::string& tag : tagged.tags) {
      seq.push_back(a.strict ? depcodec::parse_label(tag)
                             : depcodec::parse_label_lenient(tag, &dropped));
    }
    const depcodec::DepTree tree = depcodec::decode_labels(seq, tagged.forms.size());
    if (templ) {
      do {
        if (!templ->next(base)) {
          throw std::runtime_error("template has fewer sentences than the label file");
        }
      } while (base.size() == 0);
      if (base.size() != tree.size()) {
        throw std::runtime_error("label sentence " + std::to_string(sentences) + " has " +
                                 std::to_string(tree.size()) + " words, template has " +
                                 std::to_string(base.size()));
      }
      conllu::write(out, base.with_tree(tree));
    } else {
      conllu::write(out, conllu::Sentence::from_tree(tagged.forms, tree));
    }
  }
  if (templ) {
    while (templ->next(base)) {
      if (base.size() > 0) throw std::runtime_error("template has more sentences than the label file");
    }
  }
  if (!out) throw std::runtime_error("failed writing " + a.output.string());
  std::cerr << sentences << " sentences decoded";
  if (dropped > 0) std::cerr << ", " << dropped << " malformed label components ignored";
  std::cerr << '\n';
}

}  // namespace

void register_dep_commands(CLI::App& root, std::vector<Command>& out) {
  {
    auto args = std::make_shared<EncodeArgs>();
    CLI::App* app = root.add_subcommand(
        "dep-encode",
        "CoNLL-U trees to arc-standard labels: FORM<TAB>LABEL per word, LABEL = "
        "SH(+(LA|RA)@rel)*, blank line between sentences");
    app->add_option("input", args->input, "CoNLL-U file")->required()->check(CLI::ExistingFile);
    app->add_option("output", args->output, "label file")->required()->group(kOutputGroup);
    app->add_flag("--strict", args->strict,
                  "fail on non-projective sentences instead of projectivizing them");
    out.push_back({app, [app, args] { run_dep_encode(*app, *args); }});
  }
  {
    auto args = std::make_shared<DecodeArgs>();
    CLI::App* app = root.add_subcommand(
        "dep-decode",
        "Labels back to CoNLL-U. Inapplicable transitions are skipped; headless words attach to "
        "the root as 'root'");
    app->add_option("input", args->input, "label file")->required()->check(CLI::ExistingFile);
    app->add_option("output", args->output, "CoNLL-U file")->required()->group(kOutputGroup);
    app->add_option("--template", args->templ,
                    "CoNLL-U file whose lines are copied with HEAD and DEPREL replaced")
        ->check(CLI::ExistingFile);
    app->add_flag("--strict", args->strict, "reject malformed labels instead of skipping parts");
    out.push_back({app, [app, args] { run_dep_decode(*app, *args); }});
  }
}

}  // namespace morphbert::cli
