// Reference masked-LM scorer: piece-bigram counts served over stdin/stdout.

#include <iostream>

#include <CLI11.hpp>

#include "morphbert/common/text_io.hpp"
#include "morphbert/scorer.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Count-based masked-LM scorer speaking the JSON-lines protocol on stdin/stdout"};
  std::string vocab_path;
  std::vector<std::string> train;
  app.add_option("vocab", vocab_path, "vocabulary file")->required()->check(CLI::ExistingFile);
  app.add_option("--train", train, "sentence files to count")->check(CLI::ExistingFile);
  CLI11_PARSE(app, argc, argv);

  try {
    const auto vocab = morphbert::subword::Vocabulary::load(std::filesystem::path(vocab_path));
    std::vector<std::string> lines;
    for (const auto& path : train) {
      morphbert::LineReader reader(path);
      std::string line;
      while (reader.next(line)) {
        if (!line.empty() && !morphbert::is_provenance_line(line)) lines.push_back(line);
      }
    }
    morphbert::scorer::CountScorer scorer(vocab, lines);
    std::ios::sync_with_stdio(false);
    morphbert::scorer::serve(scorer, std::cin, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "count_scorer: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
