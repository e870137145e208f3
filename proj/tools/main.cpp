#include "commands.hpp"

int main(int argc, char** argv) { return tckls::cli::run(argc, argv); }
