namespace hybridfem {}
