#pragma once

#include <string>
#include <unordered_set>

namespace urlcomsum {

using StopwordSet = std::unordered_set<std::string>;

/// The list shipped in data/stopwords.txt, compiled in.
const StopwordSet& builtin_stopwords();

/// One token per line; blank lines and lines starting with '#' are skipped.
StopwordSet load_stopwords(const std::string& path);

/// URLCOMSUM_STOPWORDS if set, else the explicit path if non-empty, else the
/// built-in list.
StopwordSet resolve_stopwords(const std::string& explicit_path = {});

}  // namespace urlcomsum
