/// Rare English words used as nonsense attribute values.
pub const UNCOMMON_WORDS: [&str; 64] = [
    "absquatulate", "bibliopole", "borborygmus", "brabble", "callipygian", "cattywampus", "collywobbles", "comminatory",
    "crapulence", "defenestrate", "dithyramb", "erinaceous", "flibbertigibbet", "floccinaucinihilipilification",
    "frowzy", "gallimaufry", "gardyloo", "gobbledygook", "hobbledehoy", "hornswoggle", "impignorate", "jentacular",
    "kakistocracy", "kerfuffle", "lollygag", "lucubration", "mumpsimus", "nudiustertian", "obambulate", "octothorpe",
    "oxter", "pandiculation", "perendinate", "petrichor", "quockerwodger", "rambunctious", "ratoon", "rigmarole",
    "sesquipedalian", "skedaddle", "slubberdegullion", "snollygoster", "taradiddle", "tatterdemalion", "ultracrepidarian",
    "vilipend", "wabbit", "widdershins", "xertz", "yarborough", "zenzizenzizenzic", "zugzwang", "bumbershoot",
    "cacoethes", "didgeridoo", "fard", "gongoozler", "hugger-mugger", "jargogle", "lickspittle", "malarkey",
    "nincompoop", "quidnunc", "scrobble",
];
