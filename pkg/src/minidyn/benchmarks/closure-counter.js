// Counters held in closures.
function makeCounter(step) {
    var count = 0;
    return function () {
        count = count + step;
        return count;
    };
}

function main() {
    var inc = makeCounter(1);
    var dec = makeCounter(-1);
    var r = 0;
    for (var i = 0; i < 150; i++) {
        r = inc() + dec() + r;
    }
    return r + inc();
}
