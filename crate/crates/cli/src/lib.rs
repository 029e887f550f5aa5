//! Library surface of the CLI, exposed so integration tests can drive the
//! subcommands directly.
