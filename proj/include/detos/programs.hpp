#pragma once

#include <string>

#include "detos/guest.hpp"

namespace detos {

// The fixture programs shipped with the library, selectable by name.
const ProgramRegistry& builtin_programs();

// Main and one spawned task each perform `steps` appends of their own letter
// to `path`, with an interrupt point between consecutive steps; main then
// joins and echoes the resulting order to stdout.
GuestMain interleave_program(int steps_main, int steps_other, std::string path = "/order");

// `count` guarded allocations; failures are handled and reported on stdout.
GuestMain guarded_allocs_program(int count);

void register_thread_programs(ProgramRegistry& r);
void register_file_programs(ProgramRegistry& r);
void register_misc_programs(ProgramRegistry& r);

}  // namespace detos
