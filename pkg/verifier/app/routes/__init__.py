# Routes package

