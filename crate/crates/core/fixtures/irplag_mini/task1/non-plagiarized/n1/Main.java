public class Main {
    public static void main(String[] args) {
        long product = 1L;
        for (int i = 1; i <= 5; i++) product *= i;
        System.out.println("product " + product);
    }
}
