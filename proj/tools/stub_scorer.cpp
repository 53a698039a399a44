// Line-protocol scorer: reads "<sentence>\t<TYPE>" and answers with the stub
// keyword-overlap score. Lets the external scorer path run without a model.
#include <iomanip>
#include <iostream>
#include <limits>
#include <string>

#include "ser/spanlabel.hpp"

int main() {
  ser::RuleLemmatizer lemmatizer;
  ser::StubScorer scorer(lemmatizer);
  std::cout << std::setprecision(std::numeric_limits<double>::max_digits10);
  std::string line;
  while (std::getline(std::cin, line)) {
    const auto tab = line.rfind('\t');
    const auto type = tab == std::string::npos ? std::nullopt
                                               : ser::parse_entity_type(line.substr(tab + 1));
    if (!type) {
      std::cout << "error\n" << std::flush;
      continue;
    }
    std::cout << scorer.score(line.substr(0, tab), *type) << '\n' << std::flush;
  }
}
