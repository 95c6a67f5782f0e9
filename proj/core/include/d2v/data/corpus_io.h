#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "d2v/data/types.h"

namespace d2v::data {

// Line-delimited JSON corpus format, one record per entity:
//
//   {"kind":"header","format_version":1,"seed":..,"counts":{...}}
//   {"kind":"vocab","space":"diagnosis"|"procedure"|"medication","codes":[..]}
//   {"kind":"vocab","space":"category","field":..,"values":[..]}
//   {"kind":"vocab","space":"static","names":[..]}
//   {"kind":"doctor",..}  {"kind":"patient",..}  {"kind":"trial",..}  {"kind":"sample",..}
//
// Output is canonical: keys sorted, records in a fixed order, multi-hot
// vectors as sorted index lists. save(load(save(c))) is byte-identical.
void write_corpus(std::ostream& os, const Corpus& corpus);
std::string corpus_to_string(const Corpus& corpus);
void save_corpus(const std::filesystem::path& path, const Corpus& corpus);

// Throws FormatError with the 1-based line number on malformed input and
// ValidationError when the decoded corpus violates an invariant.
Corpus read_corpus(std::istream& is);
Corpus load_corpus(const std::filesystem::path& path);

}  // namespace d2v::data
